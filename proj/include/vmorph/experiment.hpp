#pragma once

#include <array>
#include <string>
#include <vector>

#include "vmorph/anatomy.hpp"
#include "vmorph/config.hpp"
#include "vmorph/metrics.hpp"
#include "vmorph/nn/train.hpp"
#include "vmorph/phantom.hpp"

namespace vmorph {

namespace detail {

inline Slice2D crop_slice(const Slice2D& s, int oy, int ox, int h, int w) {
    if (oy < 0 || ox < 0 || oy + h > s.height || ox + w > s.width)
        throw value_error("crop_slice: window leaves the slice");
    Slice2D out(h, w, s.sx, s.sy);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(y, x) = s.at(oy + y, ox + x);
    return out;
}

inline AllowMask crop_allow(const AllowMask& a, int oy, int ox, int h, int w) {
    AllowMask out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out.data[static_cast<std::size_t>(y) * w + x] =
                a.data[static_cast<std::size_t>(oy + y) * a.width + (ox + x)];
    return out;
}

}  // namespace detail

/// Deterministic per-id variation of the template phantom: jittered vessel
/// geometry plus organ-like ellipsoids placed around the vessel with wall
/// clearance. Distractor tissue is sampled in the thrombus intensity band so
/// an intensity-only model cannot separate them.
inline PhantomSpec sample_phantom_spec(const ExperimentConfig& cfg, int phantom_id) {
    PhantomSpec spec = cfg.phantom;
    const std::uint64_t id = static_cast<std::uint64_t>(phantom_id);
    spec.seed = Rng::derive(cfg.seed, 0x9e01, id).next_u64();

    Rng jr = Rng::derive(cfg.seed, 0x9e02, id);
    const PhantomSpec& t = cfg.phantom;
    spec.lumen_radius_mm = t.lumen_radius_mm * jr.uniform(0.8, 1.1);
    const double bulge_delta = t.bulge_radius_mm - t.lumen_radius_mm;
    spec.bulge_radius_mm = spec.lumen_radius_mm + bulge_delta * jr.uniform(0.6, 1.0);
    spec.bulge_center_z_mm = spec.extent_z() * jr.uniform(0.42, 0.58);
    spec.bulge_sigma_mm = t.bulge_sigma_mm * jr.uniform(0.8, 1.2);
    spec.axis_amplitude_mm = jr.uniform(0.0, std::max(t.axis_amplitude_mm, 4.0));
    spec.axis_period_mm = t.axis_period_mm;
    // vary the vessel's base position so location is not a usable shortcut
    // for telling the aorta from look-alike tissue
    spec.axis_offset_x_mm = t.axis_offset_x_mm + jr.uniform(-10.0, 10.0);
    spec.axis_offset_y_mm = t.axis_offset_y_mm + jr.uniform(-10.0, 10.0);

    auto place = [&](int count, double hu_lo, double hu_hi, bool vessel_mimic, const char* name,
                     std::vector<Ellipsoid>& out) {
        for (int k = 0; k < count; ++k) {
            for (int attempt = 0; attempt < 60; ++attempt) {
                Ellipsoid e;
                e.name = name;
                e.intensity_hu = jr.uniform(hu_lo, hu_hi);
                // most distractors carry a bright interior, like vertebral
                // bodies or contrast-filled bowel: a thrombus-like ring
                // around a lumen-like core, so appearance alone cannot
                // separate them from the aneurysm
                if (vessel_mimic && jr.uniform() < 0.7) {
                    e.core_fraction = jr.uniform(0.45, 0.7);
                    e.core_hu = jr.uniform(250.0, 350.0);
                }
                e.semi_mm = {jr.uniform(5.0, 11.0), jr.uniform(5.0, 11.0),
                             jr.uniform(8.0, 18.0)};
                const double cz = jr.uniform(0.2 * spec.extent_z(), 0.8 * spec.extent_z());
                // worst-case wall radius over the ellipsoid's axial span
                double local_r = 0.0;
                for (int s = 0; s <= 32; ++s) {
                    double z = cz + e.semi_mm[2] * (2.0 * s / 32.0 - 1.0);
                    local_r = std::max(local_r, spec.outer_radius(z));
                }
                const double in_plane = std::max(e.semi_mm[0], e.semi_mm[1]);
                const double dist = local_r + in_plane + jr.uniform(1.5, 4.0);
                const double theta = jr.uniform(0.0, 2.0 * std::numbers::pi);
                auto c = spec.axis_at(cz);
                e.center_mm = {c[0] + dist * std::cos(theta), c[1] + dist * std::sin(theta), cz};

                bool inside = true;
                const double ext[3] = {spec.extent_x(), spec.extent_y(), spec.extent_z()};
                for (int a = 0; a < 3; ++a)
                    if (e.center_mm[a] - e.semi_mm[a] < 1.0 ||
                        e.center_mm[a] + e.semi_mm[a] > ext[a] - 1.0)
                        inside = false;
                // keep the center within the training crop window so the
                // tissue actually shows up in the slices the model sees
                const double cx_lo = 0.5 * (ext[0] - cfg.crop_px * cfg.target_spacing_mm) + 2.0;
                const double cy_lo = 0.5 * (ext[1] - cfg.crop_px * cfg.target_spacing_mm) + 2.0;
                if (e.center_mm[0] < cx_lo || e.center_mm[0] > ext[0] - cx_lo ||
                    e.center_mm[1] < cy_lo || e.center_mm[1] > ext[1] - cy_lo)
                    inside = false;
                if (!inside) continue;
                out.push_back(e);
                break;
            }
        }
    };
    spec.distractors.clear();
    spec.soft_tissue.clear();
    place(cfg.distractors_per_phantom, 45.0, 75.0, true, "distractor", spec.distractors);
    place(cfg.soft_tissue_per_phantom, 30.0, 50.0, false, "soft_tissue", spec.soft_tissue);
    spec.validate();
    return spec;
}

/// Windowed center-cropped training slices of one phantom: every
/// slice_stride-th aorta-containing slice, with the allow mask built from the
/// label map and ground-truth positives forced back in.
inline std::vector<nn::TrainSample> build_slice_samples(const PhantomData& data,
                                                        const ExperimentConfig& cfg,
                                                        int patient_id) {
    const Volume3D win = window_normalize(data.image, cfg.window_lo_hu, cfg.window_hi_hu);
    const Volume3D exclusion = build_exclusion_mask(data.labels);
    std::vector<int> kept = filter_slices_by_aorta(data.labels, cfg.min_aorta_voxels);

    const int crop = cfg.crop_px;
    const int ox = (win.nx - crop) / 2;
    const int oy = (win.ny - crop) / 2;

    std::vector<nn::TrainSample> out;
    for (std::size_t k = 0; k < kept.size(); k += static_cast<std::size_t>(cfg.slice_stride)) {
        const int z = kept[k];
        nn::TrainSample s;
        s.image = detail::crop_slice(extract_slice(win, z), oy, ox, crop, crop);
        s.gt = detail::crop_slice(extract_slice(data.gt, z), oy, ox, crop, crop);
        AllowMask full = allow_mask_for_slice(exclusion, z);
        s.allow = detail::crop_allow(full, oy, ox, crop, crop);
        apply_gt_override(s.allow, s.gt);
        s.patient_id = patient_id;
        out.push_back(std::move(s));
    }
    return out;
}

struct CompareArm {
    nn::LossMode mode = nn::LossMode::anatomy_aware;
    nn::TrainResult result;
    EvalSummary test;
};

struct CompareResult {
    Partition partition;
    std::vector<CompareArm> arms;  // anatomy-aware first, then baseline
};

/// Mean/aggregate test metrics of a trained state, unmasked, over slices with
/// nonempty ground truth.
inline EvalSummary evaluate_samples(nn::UNet& net, const std::vector<nn::TrainSample>& samples,
                                    double threshold = 0.5) {
    std::vector<SliceCounts> counts;
    for (std::size_t start = 0; start < samples.size(); start += 8) {
        const std::size_t n = std::min<std::size_t>(8, samples.size() - start);
        const auto& first = samples[start].image;
        nn::Tensor4 x(static_cast<int>(n), 1, first.height, first.width);
        for (std::size_t i = 0; i < n; ++i)
            std::copy_n(samples[start + i].image.data.data(), first.data.size(),
                        x.plane(static_cast<int>(i), 0));
        nn::Tensor4 prob = net.forward(x, false);
        for (std::size_t i = 0; i < n; ++i) {
            SliceTensor pred = nn::detail::plane_to_slice(prob, static_cast<int>(i));
            SliceTensor gt(samples[start + i].gt.height, samples[start + i].gt.width);
            gt.data = samples[start + i].gt.data;
            counts.push_back(count_slice(binarize(pred, threshold), gt));
        }
    }
    return summarize(counts);
}

/// Patient-level split of phantom ids 0..n-1, derived from the experiment
/// seed so every stage of a run agrees on it.
inline Partition experiment_partition(const ExperimentConfig& cfg) {
    std::vector<int> ids(static_cast<std::size_t>(cfg.n_phantoms));
    for (int i = 0; i < cfg.n_phantoms; ++i) ids[static_cast<std::size_t>(i)] = i;
    return split_patients(ids, cfg.n_train, cfg.n_val, cfg.n_test,
                          Rng::derive(cfg.seed, 0x5713, 0).next_u64());
}

/// Fold the experiment seed into the weight-init and shuffle/augment streams
/// so different experiment seeds are independent replicates end to end. The
/// sub-seeds still participate, so they stay usable as extra stream selectors.
inline nn::UNetConfig seeded_net_config(const ExperimentConfig& cfg) {
    nn::UNetConfig nc = cfg.net;
    nc.seed = Rng::derive(cfg.seed, 0x6e31, nc.seed).next_u64();
    return nc;
}

inline nn::TrainConfig seeded_train_config(const ExperimentConfig& cfg) {
    nn::TrainConfig tc = cfg.train;
    tc.seed = Rng::derive(cfg.seed, 0x6e32, tc.seed).next_u64();
    return tc;
}

/// The ablation protocol: identical phantoms, split, initialization, and
/// shuffling; the only difference between the arms is the loss mode.
inline CompareResult run_compare(const ExperimentConfig& cfg) {
    CompareResult res;
    res.partition = experiment_partition(cfg);

    std::vector<std::vector<nn::TrainSample>> per_phantom(
        static_cast<std::size_t>(cfg.n_phantoms));
    for (int i = 0; i < cfg.n_phantoms; ++i) {
        PhantomData data = generate_phantom(sample_phantom_spec(cfg, i));
        per_phantom[static_cast<std::size_t>(i)] = build_slice_samples(data, cfg, i);
    }
    auto gather = [&](const std::vector<int>& members) {
        std::vector<nn::TrainSample> out;
        for (int id : members)
            for (const auto& s : per_phantom[static_cast<std::size_t>(id)]) out.push_back(s);
        return out;
    };
    const std::vector<nn::TrainSample> train_set = gather(res.partition.train);
    const std::vector<nn::TrainSample> val_set = gather(res.partition.val);
    const std::vector<nn::TrainSample> test_set = gather(res.partition.test);

    const nn::UNetConfig net_cfg = seeded_net_config(cfg);
    for (nn::LossMode mode : {nn::LossMode::anatomy_aware, nn::LossMode::baseline}) {
        nn::TrainConfig tc = seeded_train_config(cfg);
        tc.loss_mode = mode;
        CompareArm arm;
        arm.mode = mode;
        arm.result = nn::train(net_cfg, tc, train_set, val_set);
        nn::UNet net(net_cfg);
        net.load_state_flat(arm.result.best_state);
        arm.test = evaluate_samples(net, test_set);
        res.arms.push_back(std::move(arm));
    }
    return res;
}

inline std::string join_ids(const std::vector<int>& ids) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ';';
        out += std::to_string(ids[i]);
    }
    return out;
}

/// Side-by-side CSV, one row per loss mode, partition ids echoed per row so
/// the identical-conditions claim is checkable from the artifact alone.
inline void write_compare_csv(const CompareResult& res, std::uint64_t seed,
                              const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw io_error("write_compare_csv: cannot open " + path);
    std::fprintf(f,
                 "mode,seed,test_dice_mean,test_dice_sd,test_precision,test_recall,"
                 "test_slices,best_epoch,best_val_dice,train_ids,val_ids,test_ids\n");
    for (const auto& arm : res.arms) {
        std::fprintf(f, "%s,%llu,%.17g,%.17g,%.17g,%.17g,%d,%d,%.17g,%s,%s,%s\n",
                     nn::to_string(arm.mode), static_cast<unsigned long long>(seed),
                     arm.test.dice_mean, arm.test.dice_sd, arm.test.precision.value_or(-1.0),
                     arm.test.recall.value_or(-1.0), arm.test.dice_slices,
                     arm.result.best_epoch, arm.result.best_val_dice,
                     join_ids(res.partition.train).c_str(), join_ids(res.partition.val).c_str(),
                     join_ids(res.partition.test).c_str());
    }
    std::fclose(f);
}

}  // namespace vmorph
