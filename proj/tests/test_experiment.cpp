#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <set>
#include <string>

#include "vmorph/experiment.hpp"

using namespace vmorph;

namespace {

std::string slurp(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    REQUIRE(f != nullptr);
    std::string text;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof(buf), f)) > 0) text.append(buf, n);
    std::fclose(f);
    return text;
}

}  // namespace

TEST_CASE("phantom sampling is deterministic and varied across ids") {
    ExperimentConfig cfg;
    PhantomSpec a = sample_phantom_spec(cfg, 0);
    PhantomSpec b = sample_phantom_spec(cfg, 0);
    CHECK(a.seed == b.seed);
    CHECK(a.lumen_radius_mm == b.lumen_radius_mm);
    CHECK(a.axis_offset_x_mm == b.axis_offset_x_mm);
    CHECK(a.distractors.size() == b.distractors.size());

    std::set<double> lumens, offsets;
    for (int id = 0; id < 8; ++id) {
        PhantomSpec s = sample_phantom_spec(cfg, id);
        // sample_phantom_spec validates internally; re-check the jitter ranges
        CHECK(s.lumen_radius_mm >= 0.8 * cfg.phantom.lumen_radius_mm);
        CHECK(s.lumen_radius_mm <= 1.1 * cfg.phantom.lumen_radius_mm);
        CHECK(s.bulge_radius_mm >= s.lumen_radius_mm);
        CHECK(std::abs(s.axis_offset_x_mm) <= 10.0);
        CHECK(std::abs(s.axis_offset_y_mm) <= 10.0);
        CHECK(s.distractors.size() == static_cast<std::size_t>(cfg.distractors_per_phantom));
        CHECK(s.soft_tissue.size() == static_cast<std::size_t>(cfg.soft_tissue_per_phantom));
        lumens.insert(s.lumen_radius_mm);
        offsets.insert(s.axis_offset_x_mm);
    }
    CHECK(lumens.size() == 8);
    CHECK(offsets.size() == 8);
}

TEST_CASE("slice samples are cropped, normalized, and override-consistent") {
    ExperimentConfig cfg;
    PhantomData data = generate_phantom(sample_phantom_spec(cfg, 0));
    auto samples = build_slice_samples(data, cfg, 0);

    std::vector<int> kept = filter_slices_by_aorta(data.labels, cfg.min_aorta_voxels);
    CHECK(samples.size() == (kept.size() + cfg.slice_stride - 1) / cfg.slice_stride);

    bool any_masked = false;
    for (const auto& s : samples) {
        REQUIRE(s.image.height == cfg.crop_px);
        REQUIRE(s.image.width == cfg.crop_px);
        CHECK(s.patient_id == 0);
        double gt_sum = 0.0;
        for (std::size_t i = 0; i < s.image.data.size(); ++i) {
            CHECK(s.image.data[i] >= 0.0);
            CHECK(s.image.data[i] <= 1.0);
            gt_sum += s.gt.data[i];
            // the override guarantees every positive stays supervised
            if (s.gt.data[i] > 0.5) CHECK(s.allow.data[i] == 1);
            if (s.allow.data[i] == 0) any_masked = true;
        }
        CHECK(gt_sum > 0.0);
    }
    CHECK(any_masked);
}

TEST_CASE("compare runs are reproducible end to end") {
    ExperimentConfig cfg;
    cfg.n_phantoms = 3;
    cfg.n_train = 1;
    cfg.n_val = 1;
    cfg.n_test = 1;
    cfg.slice_stride = 24;
    cfg.train.max_epochs = 1;
    cfg.train.augment_enabled = true;
    cfg.seed = 5;
    cfg.validate();

    CompareResult r1 = run_compare(cfg);
    CompareResult r2 = run_compare(cfg);

    REQUIRE(r1.arms.size() == 2);
    CHECK(r1.arms[0].mode == nn::LossMode::anatomy_aware);
    CHECK(r1.arms[1].mode == nn::LossMode::baseline);
    CHECK(r1.partition.train == r2.partition.train);
    CHECK(r1.partition.test == r2.partition.test);
    for (int a = 0; a < 2; ++a) {
        CHECK(r1.arms[a].test.dice_mean == r2.arms[a].test.dice_mean);
        CHECK(r1.arms[a].result.best_val_dice == r2.arms[a].result.best_val_dice);
        CHECK(r1.arms[a].result.best_state == r2.arms[a].result.best_state);
    }

    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "vmorph_experiment_test";
    fs::create_directories(dir);
    write_compare_csv(r1, cfg.seed, (dir / "a.csv").string());
    write_compare_csv(r2, cfg.seed, (dir / "b.csv").string());
    std::string a = slurp((dir / "a.csv").string());
    REQUIRE(a == slurp((dir / "b.csv").string()));

    CHECK(a.starts_with(
        "mode,seed,test_dice_mean,test_dice_sd,test_precision,test_recall,"
        "test_slices,best_epoch,best_val_dice,train_ids,val_ids,test_ids\n"));
    CHECK(a.find("anatomy-aware,5,") != std::string::npos);
    CHECK(a.find("baseline,5,") != std::string::npos);
    fs::remove_all(dir);
}
