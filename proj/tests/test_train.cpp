#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "vmorph/nn/train.hpp"

using namespace vmorph;
using namespace vmorph::nn;

namespace {

namespace fs = std::filesystem;

fs::path tmp_path(const char* name) {
    auto dir = fs::temp_directory_path() / "vmorph_train_tests";
    fs::create_directories(dir);
    return dir / name;
}

// bright disk on dark background, gt = the disk
TrainSample disk_sample(int size, double cy, double cx, double r, std::uint64_t seed) {
    TrainSample s;
    s.image = Slice2D(size, size, 1.0, 1.0);
    s.gt = Slice2D(size, size, 1.0, 1.0);
    s.allow = AllowMask(size, size);
    Rng rng(seed);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            bool in = std::hypot(y - cy, x - cx) <= r;
            s.image.at(y, x) = std::clamp((in ? 0.6 : 0.13) + rng.normal(0.0, 0.02), 0.0, 1.0);
            s.gt.at(y, x) = in ? 1.0 : 0.0;
        }
    return s;
}

}  // namespace

TEST_CASE("early stopper: strictly decreasing score stops after patience") {
    EarlyStopper es(1);
    REQUIRE(es.observe(1, 0.9));
    REQUIRE(!es.should_stop());
    REQUIRE(!es.observe(2, 0.8));
    REQUIRE(es.should_stop());
    REQUIRE(es.best_epoch == 1);
    REQUIRE(es.best == 0.9);
}

TEST_CASE("early stopper: improvement resets the counter") {
    EarlyStopper es(2);
    es.observe(1, 0.5);
    es.observe(2, 0.4);
    REQUIRE(!es.should_stop());
    es.observe(3, 0.6);
    REQUIRE(es.since_best == 0);
    es.observe(4, 0.6);  // ties do not count as improvement
    es.observe(5, 0.6);
    REQUIRE(es.should_stop());
    REQUIRE(es.best_epoch == 3);
}

TEST_CASE("checkpoint round-trip restores the exact state") {
    UNetConfig cfg;
    cfg.levels = 2;
    cfg.base_channels = 3;
    cfg.seed = 42;
    UNet net(cfg);
    auto state = net.state_flat();
    auto p = tmp_path("net.ckpt").string();
    save_checkpoint(cfg, state, p);

    UNet back = load_checkpoint(p);
    REQUIRE(back.cfg.levels == 2);
    REQUIRE(back.cfg.base_channels == 3);
    REQUIRE(back.cfg.use_batchnorm == cfg.use_batchnorm);
    REQUIRE(back.state_flat() == state);

    Tensor4 x(1, 1, 16, 16);
    Rng rng(1);
    for (auto& v : x.data) v = rng.uniform();
    REQUIRE(net.forward(x, false).data == back.forward(x, false).data);
}

TEST_CASE("checkpoint loader rejects foreign and truncated files") {
    auto bad = tmp_path("bad.ckpt").string();
    {
        std::FILE* f = std::fopen(bad.c_str(), "wb");
        std::fwrite("NOTANET1", 1, 8, f);
        std::fclose(f);
    }
    REQUIRE_THROWS_AS(load_checkpoint(bad), format_error);

    UNetConfig cfg;
    cfg.levels = 1;
    cfg.base_channels = 2;
    UNet net(cfg);
    auto p = tmp_path("trunc.ckpt").string();
    save_checkpoint(cfg, net.state_flat(), p);
    fs::resize_file(p, fs::file_size(p) - 64);
    REQUIRE_THROWS_AS(load_checkpoint(p), io_error);

    REQUIRE_THROWS_AS(load_checkpoint("/no/such/file.ckpt"), io_error);
}

TEST_CASE("history csv round-trips") {
    std::vector<EpochRow> rows = {{1, 0.75, 0.12}, {2, 0.5431, 0.661}, {3, 0.1, 0.97}};
    auto p = tmp_path("history.csv").string();
    write_history(rows, p);
    auto back = read_history(p);
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        REQUIRE(back[i].epoch == rows[i].epoch);
        REQUIRE(back[i].train_loss == rows[i].train_loss);  // %.17g is lossless
        REQUIRE(back[i].val_dice == rows[i].val_dice);
    }

    auto junk = tmp_path("junk.csv").string();
    std::FILE* f = std::fopen(junk.c_str(), "w");
    std::fprintf(f, "nope\n");
    std::fclose(f);
    REQUIRE_THROWS_AS(read_history(junk), format_error);
}

TEST_CASE("tiny unet end-to-end gradients match finite differences") {
    UNetConfig cfg;
    cfg.levels = 1;
    cfg.base_channels = 2;
    cfg.use_batchnorm = false;
    cfg.seed = 3;
    UNet net(cfg);

    const int hw = 8;
    Tensor4 x(1, 1, hw, hw);
    SliceTensor gt(hw, hw);
    AllowMask allow(hw, hw);
    Rng rng(4);
    for (int i = 0; i < hw * hw; ++i) {
        x.data[i] = rng.uniform();
        gt.data[i] = rng.coin() ? 1.0 : 0.0;
        allow.data[i] = rng.uniform() < 0.85 ? 1.0 : 0.0;
    }
    MaskedLossConfig lcfg;

    auto loss_now = [&] {
        Tensor4 prob = net.forward(x, true);
        SliceTensor p(hw, hw);
        p.data = prob.data;
        return masked_combined_loss(p, gt, allow, lcfg);
    };

    Tensor4 prob = net.forward(x, true);
    SliceTensor p(hw, hw);
    p.data = prob.data;
    SliceTensor g = masked_combined_loss_grad(p, gt, allow, lcfg);
    Tensor4 gp(1, 1, hw, hw);
    gp.data = g.data;
    net.zero_grad();
    net.backward(gp);

    const double step = 1e-6;
    double worst = 0.0;
    for (auto& pr : net.parameters())
        for (std::size_t i = 0; i < pr.size; ++i) {
            double keep = pr.value[i];
            pr.value[i] = keep + step;
            double hi = loss_now();
            pr.value[i] = keep - step;
            double lo = loss_now();
            pr.value[i] = keep;
            double fd = (hi - lo) / (2 * step);
            double rel = std::abs(fd - pr.grad[i]) /
                         std::max({std::abs(fd), std::abs(pr.grad[i]), 1.0});
            worst = std::max(worst, rel);
        }
    REQUIRE(worst < 1e-4);
}

TEST_CASE("fully excluded slice produces exactly zero parameter gradients") {
    UNetConfig cfg;
    cfg.levels = 1;
    cfg.base_channels = 2;
    cfg.seed = 5;
    UNet net(cfg);
    const int hw = 8;
    Tensor4 x(1, 1, hw, hw);
    Rng rng(6);
    for (auto& v : x.data) v = rng.uniform();
    SliceTensor gt(hw, hw);
    AllowMask allow(hw, hw, 0.0);

    Tensor4 prob = net.forward(x, true);
    SliceTensor p(hw, hw);
    p.data = prob.data;
    SliceTensor g = masked_combined_loss_grad(p, gt, allow);
    Tensor4 gp(1, 1, hw, hw);
    gp.data = g.data;
    net.zero_grad();
    net.backward(gp);
    for (auto& pr : net.parameters())
        for (std::size_t i = 0; i < pr.size; ++i) REQUIRE(pr.grad[i] == 0.0);
}

TEST_CASE("duplicated sample with mean reduction equals the single-sample gradient") {
    UNetConfig cfg;
    cfg.levels = 1;
    cfg.base_channels = 2;
    cfg.use_batchnorm = false;
    cfg.seed = 7;
    const int hw = 8;
    Rng rng(8);
    Tensor4 x1(1, 1, hw, hw);
    SliceTensor gt(hw, hw);
    AllowMask allow(hw, hw);
    for (int i = 0; i < hw * hw; ++i) {
        x1.data[i] = rng.uniform();
        gt.data[i] = rng.coin() ? 1.0 : 0.0;
    }

    auto grads_for = [&](int copies) {
        UNet net(cfg);
        Tensor4 x(copies, 1, hw, hw);
        for (int s = 0; s < copies; ++s)
            std::copy_n(x1.data.data(), hw * hw, x.plane(s, 0));
        Tensor4 prob = net.forward(x, true);
        Tensor4 gp(copies, 1, hw, hw);
        for (int s = 0; s < copies; ++s) {
            SliceTensor p(hw, hw);
            std::copy_n(prob.plane(s, 0), hw * hw, p.data.begin());
            SliceTensor g = masked_combined_loss_grad(p, gt, allow);
            double* dst = gp.plane(s, 0);
            for (int i = 0; i < hw * hw; ++i) dst[i] = g.data[i] / copies;
        }
        net.zero_grad();
        net.backward(gp);
        std::vector<double> flat;
        for (auto& pr : net.parameters()) flat.insert(flat.end(), pr.grad, pr.grad + pr.size);
        return flat;
    };

    auto g1 = grads_for(1), g2 = grads_for(2);
    REQUIRE(g1.size() == g2.size());
    for (std::size_t i = 0; i < g1.size(); ++i)
        REQUIRE(g2[i] == Catch::Approx(g1[i]).margin(1e-12));
}

TEST_CASE("training memorizes a single slice") {
    std::vector<TrainSample> data = {disk_sample(32, 15.5, 15.5, 9.0, 21)};

    UNetConfig ncfg;
    ncfg.levels = 2;
    ncfg.base_channels = 4;
    ncfg.seed = 9;
    TrainConfig tcfg;
    tcfg.lr = 1e-3;
    tcfg.batch_size = 1;
    tcfg.max_epochs = 500;  // one step per epoch
    tcfg.patience = 500;
    tcfg.augment_enabled = false;
    tcfg.seed = 10;

    TrainResult r = train(ncfg, tcfg, data, data);
    REQUIRE(r.best_val_dice >= 0.95);

    UNet net(ncfg);
    net.load_state_flat(r.best_state);
    REQUIRE(validation_dice(net, data) == Catch::Approx(r.best_val_dice));
}

TEST_CASE("training is reproducible from the seed") {
    std::vector<TrainSample> train_set, val_set;
    for (int i = 0; i < 4; ++i)
        train_set.push_back(disk_sample(16, 7.0 + i * 0.3, 8.0 - i * 0.4, 5.0, 100 + i));
    val_set.push_back(disk_sample(16, 7.5, 7.5, 5.0, 200));

    UNetConfig ncfg;
    ncfg.levels = 1;
    ncfg.base_channels = 2;
    ncfg.seed = 11;
    TrainConfig tcfg;
    tcfg.batch_size = 2;
    tcfg.max_epochs = 3;
    tcfg.patience = 10;
    tcfg.seed = 12;

    TrainResult a = train(ncfg, tcfg, train_set, val_set);
    TrainResult b = train(ncfg, tcfg, train_set, val_set);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        REQUIRE(a.history[i].train_loss == b.history[i].train_loss);
        REQUIRE(a.history[i].val_dice == b.history[i].val_dice);
    }
    REQUIRE(a.best_state == b.best_state);

    // best_epoch is the first argmax of the validation curve
    int arg = 0;
    for (std::size_t i = 1; i < a.history.size(); ++i)
        if (a.history[i].val_dice > a.history[arg].val_dice) arg = static_cast<int>(i);
    REQUIRE(a.best_epoch == a.history[arg].epoch);
}

TEST_CASE("train rejects empty or inconsistent datasets") {
    UNetConfig ncfg;
    ncfg.levels = 1;
    ncfg.base_channels = 2;
    TrainConfig tcfg;
    tcfg.max_epochs = 1;
    std::vector<TrainSample> ok = {disk_sample(16, 7.5, 7.5, 5.0, 1)};
    std::vector<TrainSample> none;
    REQUIRE_THROWS_AS(train(ncfg, tcfg, none, ok), config_error);
    REQUIRE_THROWS_AS(train(ncfg, tcfg, ok, none), config_error);

    std::vector<TrainSample> mixed = {disk_sample(16, 7.5, 7.5, 5.0, 1),
                                      disk_sample(32, 15.5, 15.5, 9.0, 2)};
    REQUIRE_THROWS_AS(train(ncfg, tcfg, mixed, ok), config_error);
}
