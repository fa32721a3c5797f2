#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vmorph/centerline/morphometry.hpp"
#include "vmorph/experiment.hpp"
#include "vmorph/mesh/mesh_io.hpp"
#include "vmorph/nifti.hpp"

namespace fs = std::filesystem;
using namespace vmorph;

namespace {

ExperimentConfig load_or_default(const std::string& config_path) {
    if (config_path.empty()) {
        ExperimentConfig cfg;
        cfg.validate();
        return cfg;
    }
    return load_config(config_path);
}

// every run gets a config echo; rerunning with it reproduces the outputs
fs::path prepare_run_dir(const std::string& out, const ExperimentConfig& cfg) {
    fs::path dir(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw io_error("cannot create run directory " + out + ": " + ec.message());
    write_effective_config(cfg, (dir / "effective.cfg").string());
    return dir;
}

void write_text(const fs::path& path, const std::string& text) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw io_error("cannot open " + path.string());
    if (std::fwrite(text.data(), 1, text.size(), f) != text.size()) {
        std::fclose(f);
        throw io_error("short write to " + path.string());
    }
    std::fclose(f);
}

void write_phantom_dir(const PhantomData& data, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw io_error("cannot create " + dir.string() + ": " + ec.message());
    write_nifti(data.image, dir / "image.nii");
    write_nifti(data.gt, dir / "gt.nii");
    write_nifti(data.labels.volume, dir / "labels.nii");
    write_label_table(data.labels, (dir / "labels.tsv").string());
    write_analytic_record(data.analytic, (dir / "analytic.txt").string());
}

struct LoadedPhantom {
    Volume3D image;
    Volume3D gt;
    OrganLabelMap labels;
};

LoadedPhantom load_phantom_dir(const fs::path& dir) {
    LoadedPhantom p;
    p.image = read_nifti(dir / "image.nii", VolumeKind::intensity);
    p.gt = read_nifti(dir / "gt.nii", VolumeKind::binary_mask);
    Volume3D labels = read_nifti(dir / "labels.nii", VolumeKind::integer_labels);
    p.labels = read_label_table(std::move(labels), (dir / "labels.tsv").string());
    return p;
}

std::vector<fs::path> list_phantom_dirs(const std::string& data_dir) {
    std::vector<fs::path> dirs;
    if (!fs::is_directory(data_dir)) throw io_error("data directory not found: " + data_dir);
    for (const auto& entry : fs::directory_iterator(data_dir))
        if (entry.is_directory() && fs::exists(entry.path() / "image.nii"))
            dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw io_error("no phantom directories under " + data_dir);
    return dirs;
}

std::vector<std::vector<nn::TrainSample>> load_all_samples(const ExperimentConfig& cfg,
                                                           const std::vector<fs::path>& dirs) {
    std::vector<std::vector<nn::TrainSample>> per_phantom;
    for (std::size_t i = 0; i < dirs.size(); ++i) {
        LoadedPhantom p = load_phantom_dir(dirs[i]);
        PhantomData data;
        data.image = std::move(p.image);
        data.gt = std::move(p.gt);
        data.labels = std::move(p.labels);
        per_phantom.push_back(build_slice_samples(data, cfg, static_cast<int>(i)));
    }
    return per_phantom;
}

std::vector<nn::TrainSample> gather_samples(
    const std::vector<std::vector<nn::TrainSample>>& per_phantom, const std::vector<int>& ids) {
    std::vector<nn::TrainSample> out;
    for (int id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= per_phantom.size())
            throw config_error("split references phantom " + std::to_string(id) +
                               " but only " + std::to_string(per_phantom.size()) + " were found");
        for (const auto& s : per_phantom[static_cast<std::size_t>(id)]) out.push_back(s);
    }
    return out;
}

Volume3D read_mask(const std::string& path) {
    Volume3D mask = read_nifti(path, VolumeKind::binary_mask);
    for (double v : mask.data)
        if (v != 0.0 && v != 1.0)
            throw value_error("mask " + path + " is not binary; threshold it first");
    return mask;
}

// predict every axial slice through the training crop and paste the result
// back at the crop offset, yielding a full-size binary volume
Volume3D predict_volume(nn::UNet& net, const Volume3D& image, const ExperimentConfig& cfg) {
    const Volume3D win = window_normalize(image, cfg.window_lo_hu, cfg.window_hi_hu);
    const int crop = cfg.crop_px;
    const int ox = (win.nx - crop) / 2;
    const int oy = (win.ny - crop) / 2;
    if (ox < 0 || oy < 0) throw config_error("crop_px exceeds the volume extent");

    Volume3D pred(win.nx, win.ny, win.nz, win.sx, win.sy, win.sz, VolumeKind::binary_mask);
    for (int z = 0; z < win.nz; ++z) {
        Slice2D slice = extract_slice(win, z);
        nn::Tensor4 x(1, 1, crop, crop);
        for (int y = 0; y < crop; ++y)
            for (int i = 0; i < crop; ++i)
                x.plane(0, 0)[y * crop + i] = slice.at(oy + y, ox + i);
        nn::Tensor4 prob = net.forward(x, false);
        for (int y = 0; y < crop; ++y)
            for (int i = 0; i < crop; ++i)
                pred.at(ox + i, oy + y, z) = prob.plane(0, 0)[y * crop + i] > 0.5 ? 1.0 : 0.0;
    }
    return pred;
}

VoxelIndex parse_voxel(const std::vector<int>& v) { return {v[0], v[1], v[2]}; }

struct CenterlineArtifacts {
    TriMesh mesh;
    Centerline line;
};

CenterlineArtifacts centerline_from_mask(const Volume3D& mask, const std::string& mesh_path,
                                         const std::optional<VoxelIndex>& inlet,
                                         const std::optional<VoxelIndex>& outlet,
                                         const ExperimentConfig& cfg) {
    DistanceField dist = distance_transform(mask);
    auto ends = select_endpoints(dist);
    FmmResult fmm = fast_march(dist, inlet.value_or(ends.first), outlet.value_or(ends.second),
                               cfg.fmm);
    CenterlineArtifacts out;
    out.mesh = mesh_path.empty() ? reconstruct_mesh(mask, cfg.recon) : read_obj(mesh_path);
    out.line = build_centerline(fmm.path_mm, out.mesh, cfg.tangent_window);
    return out;
}

std::string summary_csv(const EvalSummary& s) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "dice_mean,dice_sd,slices,skipped_empty,precision,recall\n"
                  "%.17g,%.17g,%d,%d,%.17g,%.17g\n",
                  s.dice_mean, s.dice_sd, s.dice_slices, s.skipped_empty,
                  s.precision.value_or(-1.0), s.recall.value_or(-1.0));
    return buf;
}

int cmd_phantom(const std::string& config_path, const std::string& out, std::uint64_t seed,
                bool seed_set, int count) {
    ExperimentConfig cfg = load_or_default(config_path);
    if (seed_set) {
        cfg.seed = seed;
        cfg.phantom.seed = seed;
    }
    fs::path dir = prepare_run_dir(out, cfg);
    if (count > 0) {
        for (int id = 0; id < count; ++id) {
            char name[32];
            std::snprintf(name, sizeof name, "phantom_%03d", id);
            write_phantom_dir(generate_phantom(sample_phantom_spec(cfg, id)), dir / name);
        }
    } else {
        write_phantom_dir(generate_phantom(cfg.phantom), dir);
    }
    return 0;
}

int cmd_preprocess(const std::string& config_path, const std::string& image_path,
                   const std::string& out) {
    ExperimentConfig cfg = load_or_default(config_path);
    fs::path dir = prepare_run_dir(out, cfg);
    Volume3D vol = read_nifti(image_path, VolumeKind::intensity);
    vol = resample(vol, cfg.target_spacing_mm, ResampleMode::trilinear);
    vol = window_normalize(vol, cfg.window_lo_hu, cfg.window_hi_hu);
    write_nifti(vol, dir / "normalized.nii");
    return 0;
}

int cmd_exclusion_mask(const std::string& config_path, const std::string& labels_path,
                       const std::string& table_path, const std::string& out) {
    ExperimentConfig cfg = load_or_default(config_path);
    fs::path dir = prepare_run_dir(out, cfg);
    Volume3D labels = read_nifti(labels_path, VolumeKind::integer_labels);
    OrganLabelMap map = read_label_table(std::move(labels), table_path);
    write_nifti(build_exclusion_mask(map), dir / "exclusion.nii");
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out, const std::string& mode) {
    ExperimentConfig cfg = load_or_default(config_path);
    if (mode == "anatomy-aware") cfg.train.loss_mode = nn::LossMode::anatomy_aware;
    else if (mode == "baseline") cfg.train.loss_mode = nn::LossMode::baseline;
    else if (!mode.empty()) throw config_error("unknown --mode '" + mode + "'");

    auto dirs = list_phantom_dirs(data_dir);
    cfg.n_phantoms = static_cast<int>(dirs.size());
    cfg.validate();
    fs::path run = prepare_run_dir(out, cfg);

    auto per_phantom = load_all_samples(cfg, dirs);
    Partition part = experiment_partition(cfg);
    const nn::UNetConfig net_cfg = seeded_net_config(cfg);
    const nn::TrainConfig train_cfg = seeded_train_config(cfg);
    nn::TrainResult result = nn::train(net_cfg, train_cfg,
                                       gather_samples(per_phantom, part.train),
                                       gather_samples(per_phantom, part.val));

    nn::save_checkpoint(net_cfg, result.best_state, (run / "checkpoint.bin").string());
    nn::write_history(result.history, (run / "history.csv").string());
    write_text(run / "partition.txt", "train=" + join_ids(part.train) +
                                          "\nval=" + join_ids(part.val) +
                                          "\ntest=" + join_ids(part.test) + "\n");
    std::printf("best epoch %d, best val dice %.4f\n", result.best_epoch, result.best_val_dice);
    return 0;
}

int cmd_evaluate(const std::string& config_path, const std::string& data_dir,
                 const std::string& checkpoint, const std::string& out,
                 const std::string& split, bool pred_volumes) {
    ExperimentConfig cfg = load_or_default(config_path);
    auto dirs = list_phantom_dirs(data_dir);
    cfg.n_phantoms = static_cast<int>(dirs.size());
    cfg.validate();
    fs::path run = prepare_run_dir(out, cfg);

    nn::UNet net = nn::load_checkpoint(checkpoint);
    Partition part = experiment_partition(cfg);
    std::vector<int> members;
    if (split == "train") members = part.train;
    else if (split == "val") members = part.val;
    else if (split == "test") members = part.test;
    else if (split == "all")
        for (int i = 0; i < cfg.n_phantoms; ++i) members.push_back(i);
    else throw config_error("unknown --split '" + split + "'");

    auto per_phantom = load_all_samples(cfg, dirs);
    EvalSummary summary = evaluate_samples(net, gather_samples(per_phantom, members));
    write_text(run / "metrics.txt", format_summary(summary));
    write_text(run / "metrics.csv", summary_csv(summary));
    std::printf("%s", format_summary(summary).c_str());

    if (pred_volumes) {
        for (int id : members) {
            LoadedPhantom p = load_phantom_dir(dirs[static_cast<std::size_t>(id)]);
            char name[32];
            std::snprintf(name, sizeof name, "pred_%03d.nii", id);
            write_nifti(predict_volume(net, p.image, cfg), run / name);
        }
    }
    return 0;
}

int cmd_reconstruct(const std::string& config_path, const std::string& mask_path,
                    const std::string& out) {
    ExperimentConfig cfg = load_or_default(config_path);
    fs::path run = prepare_run_dir(out, cfg);
    TriMesh mesh = reconstruct_mesh(read_mask(mask_path), cfg.recon);
    write_obj(mesh, (run / "mesh.obj").string());
    write_stl(mesh, (run / "mesh.stl").string());
    MeshMeasures m = mesh_measures(mesh);
    char buf[160];
    std::snprintf(buf, sizeof buf, "vertices=%zu\ntriangles=%zu\narea_mm2=%.17g\nvolume_mm3=%.17g\n",
                  mesh.vertices.size(), mesh.triangles.size(), m.area_mm2, m.volume_mm3);
    write_text(run / "measures.txt", buf);
    std::printf("%s", buf);
    return 0;
}

int cmd_centerline(const std::string& config_path, const std::string& mask_path,
                   const std::string& mesh_path, const std::string& out,
                   const std::optional<VoxelIndex>& inlet,
                   const std::optional<VoxelIndex>& outlet) {
    ExperimentConfig cfg = load_or_default(config_path);
    fs::path run = prepare_run_dir(out, cfg);
    CenterlineArtifacts art =
        centerline_from_mask(read_mask(mask_path), mesh_path, inlet, outlet, cfg);
    write_centerline_csv(art.line, (run / "centerline.csv").string());
    write_diameter_profile_csv(art.line, (run / "diameters.csv").string());
    std::printf("centerline: %zu points, %.1f mm arc, tortuosity %.4f\n", art.line.points.size(),
                art.line.arc_length_mm, art.line.tortuosity());
    return 0;
}

int cmd_morphometry(const std::string& config_path, const std::string& mask_path,
                    const std::string& mesh_path, const std::string& reference_path,
                    const std::string& out, const std::optional<VoxelIndex>& inlet,
                    const std::optional<VoxelIndex>& outlet) {
    ExperimentConfig cfg = load_or_default(config_path);
    fs::path run = prepare_run_dir(out, cfg);
    CenterlineArtifacts art =
        centerline_from_mask(read_mask(mask_path), mesh_path, inlet, outlet, cfg);
    MorphometryReport rep = morphometry(art.line, art.mesh);

    std::optional<MorphometryReference> ref;
    if (!reference_path.empty()) {
        PhantomAnalytic a = read_analytic_record(reference_path);
        ref = MorphometryReference{a.max_outer_diameter_mm, a.surface_area_mm2, a.volume_mm3};
    }
    std::string report = format_morphometry(rep, ref);
    write_text(run / "morphometry.txt", report);
    write_centerline_csv(art.line, (run / "centerline.csv").string());
    write_diameter_profile_csv(art.line, (run / "diameters.csv").string());
    if (mesh_path.empty()) write_obj(art.mesh, (run / "mesh.obj").string());
    std::printf("%s", report.c_str());
    return 0;
}

int cmd_compare(const std::string& config_path, const std::string& out, std::uint64_t seed,
                bool seed_set) {
    ExperimentConfig cfg = load_or_default(config_path);
    if (seed_set) cfg.seed = seed;
    fs::path run = prepare_run_dir(out, cfg);
    CompareResult res = run_compare(cfg);
    write_compare_csv(res, cfg.seed, (run / "compare.csv").string());
    for (const auto& arm : res.arms) {
        std::string stem = nn::to_string(arm.mode);
        nn::save_checkpoint(seeded_net_config(cfg), arm.result.best_state,
                            (run / ("checkpoint_" + stem + ".bin")).string());
        nn::write_history(arm.result.history, (run / ("history_" + stem + ".csv")).string());
        std::printf("%-14s test dice %.4f (sd %.4f, %d slices), best epoch %d\n",
                    stem.c_str(), arm.test.dice_mean, arm.test.dice_sd, arm.test.dice_slices,
                    arm.result.best_epoch);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vessel segmentation and morphometry toolkit"};
    app.require_subcommand(1);

    std::string config_path, data_dir, out, image_path, labels_path, table_path, mask_path;
    std::string mesh_path, checkpoint, reference_path, mode, split = "test";
    std::uint64_t seed = 0;
    int count = 0;
    bool pred_volumes = false;
    std::vector<int> inlet_v, outlet_v;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "config file; omitted = documented defaults");
        sub->add_option("--out", out, "run directory")->required();
    };

    CLI::App* sub_phantom = app.add_subcommand("phantom", "generate synthetic phantom volumes");
    add_common(sub_phantom);
    CLI::Option* seed_opt = sub_phantom->add_option("--seed", seed, "override the phantom seed");
    sub_phantom->add_option("--count", count, "generate N jittered phantoms instead of one");

    CLI::App* sub_pre = app.add_subcommand("preprocess", "resample and intensity-window a volume");
    add_common(sub_pre);
    sub_pre->add_option("--image", image_path, "input NIfTI volume")->required();

    CLI::App* sub_excl = app.add_subcommand("exclusion-mask", "build the loss exclusion mask");
    add_common(sub_excl);
    sub_excl->add_option("--labels", labels_path, "organ label NIfTI volume")->required();
    sub_excl->add_option("--table", table_path, "label table TSV")->required();

    CLI::App* sub_train = app.add_subcommand("train", "train one arm on a phantom directory");
    add_common(sub_train);
    sub_train->add_option("--data", data_dir, "directory of phantom_* subdirectories")->required();
    sub_train->add_option("--mode", mode, "anatomy-aware | baseline (default: config)");

    CLI::App* sub_eval = app.add_subcommand("evaluate", "evaluate a checkpoint on a split");
    add_common(sub_eval);
    sub_eval->add_option("--data", data_dir, "directory of phantom_* subdirectories")->required();
    sub_eval->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
    sub_eval->add_option("--split", split, "train | val | test | all (default test)");
    sub_eval->add_flag("--pred-volumes", pred_volumes, "also write predicted mask volumes");

    CLI::App* sub_recon = app.add_subcommand("reconstruct", "binary mask to smoothed mesh");
    add_common(sub_recon);
    sub_recon->add_option("--mask", mask_path, "binary mask NIfTI")->required();

    CLI::App* sub_center = app.add_subcommand("centerline", "extract the luminal centerline");
    add_common(sub_center);
    sub_center->add_option("--mask", mask_path, "binary mask NIfTI")->required();
    sub_center->add_option("--mesh", mesh_path, "surface mesh OBJ (default: reconstruct)");
    sub_center->add_option("--inlet", inlet_v, "inlet voxel x y z")->expected(3);
    sub_center->add_option("--outlet", outlet_v, "outlet voxel x y z")->expected(3);

    CLI::App* sub_morph = app.add_subcommand("morphometry", "centerline morphometry report");
    add_common(sub_morph);
    sub_morph->add_option("--mask", mask_path, "binary mask NIfTI")->required();
    sub_morph->add_option("--mesh", mesh_path, "surface mesh OBJ (default: reconstruct)");
    sub_morph->add_option("--reference", reference_path, "analytic record for side-by-side truth");
    sub_morph->add_option("--inlet", inlet_v, "inlet voxel x y z")->expected(3);
    sub_morph->add_option("--outlet", outlet_v, "outlet voxel x y z")->expected(3);

    CLI::App* sub_cmp = app.add_subcommand("compare", "train both loss arms under identical data");
    add_common(sub_cmp);
    CLI::Option* cmp_seed_opt = sub_cmp->add_option("--seed", seed, "override the experiment seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    std::optional<VoxelIndex> inlet, outlet;
    if (inlet_v.size() == 3) inlet = parse_voxel(inlet_v);
    if (outlet_v.size() == 3) outlet = parse_voxel(outlet_v);

    try {
        if (sub_phantom->parsed())
            return cmd_phantom(config_path, out, seed, seed_opt->count() > 0, count);
        if (sub_pre->parsed()) return cmd_preprocess(config_path, image_path, out);
        if (sub_excl->parsed()) return cmd_exclusion_mask(config_path, labels_path, table_path, out);
        if (sub_train->parsed()) return cmd_train(config_path, data_dir, out, mode);
        if (sub_eval->parsed())
            return cmd_evaluate(config_path, data_dir, checkpoint, out, split, pred_volumes);
        if (sub_recon->parsed()) return cmd_reconstruct(config_path, mask_path, out);
        if (sub_center->parsed())
            return cmd_centerline(config_path, mask_path, mesh_path, out, inlet, outlet);
        if (sub_morph->parsed())
            return cmd_morphometry(config_path, mask_path, mesh_path, reference_path, out, inlet,
                                   outlet);
        if (sub_cmp->parsed())
            return cmd_compare(config_path, out, seed, cmp_seed_opt->count() > 0);
    } catch (const config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 3;
    } catch (const value_error& e) {
        std::fprintf(stderr, "value error: %s\n", e.what());
        return 3;
    } catch (const format_error& e) {
        std::fprintf(stderr, "format error: %s\n", e.what());
        return 4;
    } catch (const io_error& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
