#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "vmorph/masked_loss.hpp"
#include "vmorph/rng.hpp"

using namespace vmorph;

namespace {

SliceTensor tensor(int h, int w, std::vector<double> v) {
    SliceTensor t(h, w);
    t.data = std::move(v);
    return t;
}

AllowMask mask(int h, int w, std::vector<double> v) {
    AllowMask a(h, w);
    a.data = std::move(v);
    return a;
}

}  // namespace

TEST_CASE("perfect prediction gives zero dice loss") {
    auto p = tensor(2, 2, {1, 1, 0, 0});
    auto y = tensor(2, 2, {1, 1, 0, 0});
    AllowMask a(2, 2);
    REQUIRE(masked_dice_loss(p, y, a) == 0.0);
}

TEST_CASE("hand-computed losses on a uniform half prediction") {
    // pred all 0.5, target half positive, everything allowed
    auto p = tensor(2, 2, {0.5, 0.5, 0.5, 0.5});
    auto y = tensor(2, 2, {1, 1, 0, 0});
    AllowMask a(2, 2);
    REQUIRE(masked_dice_loss(p, y, a) == Catch::Approx(0.49999987500003118).margin(1e-14));
    REQUIRE(masked_bce_loss(p, y, a) == Catch::Approx(0.69314700727319345).margin(1e-14));
    REQUIRE(masked_combined_loss(p, y, a) == Catch::Approx(0.59657344113661237).margin(1e-14));
}

TEST_CASE("hand-computed losses with a disallowed pixel") {
    auto p = tensor(3, 1, {0.9, 0.2, 0.7});
    auto y = tensor(3, 1, {1, 0, 1});
    auto a = mask(3, 1, {1, 1, 0});
    REQUIRE(masked_dice_loss(p, y, a) == Catch::Approx(0.14285707482996446).margin(1e-14));
    REQUIRE(masked_bce_loss(p, y, a) == Catch::Approx(0.16425195136004231).margin(1e-14));
    REQUIRE(masked_combined_loss(p, y, a) == Catch::Approx(0.1535545130950034).margin(1e-14));

    auto g = masked_combined_loss_grad(p, y, a);
    REQUIRE(g.data[0] == Catch::Approx(-0.54988633665385567).margin(1e-14));
    REQUIRE(g.data[1] == Catch::Approx(0.51658139541839532).margin(1e-14));
    REQUIRE(g.data[2] == 0.0);
}

TEST_CASE("masking is bit-exact: disallowed values cannot leak") {
    Rng rng(321);
    for (int trial = 0; trial < 20; ++trial) {
        int h = 3 + static_cast<int>(rng.uniform_index(6));
        int w = 3 + static_cast<int>(rng.uniform_index(6));
        SliceTensor p1(h, w), p2(h, w), y(h, w);
        AllowMask a(h, w);
        for (std::size_t i = 0; i < p1.size(); ++i) {
            p1.data[i] = rng.uniform();
            y.data[i] = rng.coin() ? 1.0 : 0.0;
            a.data[i] = rng.uniform() < 0.7 ? 1.0 : 0.0;
            // p2 agrees on allowed pixels, is adversarial garbage elsewhere
            p2.data[i] = a.data[i] != 0.0 ? p1.data[i] : rng.uniform();
        }
        REQUIRE(masked_dice_loss(p1, y, a) == masked_dice_loss(p2, y, a));
        REQUIRE(masked_bce_loss(p1, y, a) == masked_bce_loss(p2, y, a));
        REQUIRE(masked_combined_loss(p1, y, a) == masked_combined_loss(p2, y, a));
        auto g1 = masked_combined_loss_grad(p1, y, a);
        auto g2 = masked_combined_loss_grad(p2, y, a);
        REQUIRE(g1.data == g2.data);
    }
}

TEST_CASE("all-ones mask reduces to the unmasked loss") {
    Rng rng(11);
    SliceTensor p(4, 4), y(4, 4);
    for (std::size_t i = 0; i < p.size(); ++i) {
        p.data[i] = rng.uniform();
        y.data[i] = rng.coin() ? 1.0 : 0.0;
    }
    AllowMask a(4, 4);
    REQUIRE(masked_dice_loss(p, y, a) == dice_loss(p, y));
}

TEST_CASE("dice gradient pushes predictions toward the target") {
    auto p = tensor(1, 2, {0.3, 0.8});
    auto y = tensor(1, 2, {1, 0});
    AllowMask a(1, 2);
    MaskedLossConfig cfg;
    auto g = masked_combined_loss_grad(p, y, a, cfg);
    REQUIRE(g.data[0] < 0.0);  // increase p toward the positive label
    REQUIRE(g.data[1] > 0.0);  // decrease p on the negative label
}

TEST_CASE("bce gradient vanishes inside the clamp band") {
    MaskedLossConfig cfg;
    cfg.bce_weight = 1.0;  // isolate the bce term
    auto p = tensor(1, 2, {0.5e-7, 0.4});
    auto y = tensor(1, 2, {1, 1});
    AllowMask a(1, 2);
    auto g = masked_combined_loss_grad(p, y, a, cfg);
    REQUIRE(g.data[0] == 0.0);  // clamped at prob_clamp, d(loss)/dp is 0 there
    REQUIRE(g.data[1] != 0.0);
}

TEST_CASE("analytic gradient matches central differences") {
    Rng rng(99);
    const int h = 8, w = 8;
    SliceTensor p(h, w), y(h, w);
    AllowMask a(h, w);
    for (std::size_t i = 0; i < p.size(); ++i) {
        p.data[i] = 0.05 + 0.9 * rng.uniform();
        y.data[i] = rng.coin() ? 1.0 : 0.0;
        a.data[i] = rng.uniform() < 0.8 ? 1.0 : 0.0;
    }
    MaskedLossConfig cfg;
    auto g = masked_combined_loss_grad(p, y, a, cfg);
    const double step = 1e-6;
    for (std::size_t i = 0; i < p.size(); ++i) {
        SliceTensor lo = p, hi = p;
        lo.data[i] -= step;
        hi.data[i] += step;
        double fd = (masked_combined_loss(hi, y, a, cfg) - masked_combined_loss(lo, y, a, cfg)) /
                    (2.0 * step);
        double denom = std::max({std::abs(fd), std::abs(g.data[i]), 1.0});
        REQUIRE(std::abs(fd - g.data[i]) / denom < 1e-5);
    }
}

TEST_CASE("worked dice example with one pixel excluded") {
    auto p = tensor(1, 4, {0.5, 0.5, 0, 0});
    auto y = tensor(1, 4, {1, 0, 0, 1});
    auto a = mask(1, 4, {1, 1, 1, 0});
    const double e = 1e-6;
    REQUIRE(masked_dice_loss(p, y, a) == Catch::Approx(1.0 - (1.0 + e) / (2.0 + e)).margin(1e-15));

    MaskedLossConfig base;
    base.baseline_mode = true;
    REQUIRE(masked_dice_loss(p, y, a, base) ==
            Catch::Approx(1.0 - (1.0 + e) / (3.0 + e)).margin(1e-15));
}

TEST_CASE("single-pixel bce references") {
    const double e = 1e-6, d = 1e-7;
    auto one = tensor(1, 1, {1.0});
    auto y1 = tensor(1, 1, {1.0});
    AllowMask a1(1, 1);
    REQUIRE(masked_bce_loss(one, y1, a1) ==
            Catch::Approx(-std::log(1.0 - d) / (1.0 + e)).margin(1e-15));

    auto half = tensor(1, 1, {0.5});
    REQUIRE(masked_bce_loss(half, y1, a1) ==
            Catch::Approx(std::log(2.0) / (1.0 + e)).margin(1e-15));
}

TEST_CASE("combined weight endpoints select one term exactly") {
    Rng rng(17);
    SliceTensor p(3, 3), y(3, 3);
    AllowMask a(3, 3);
    for (std::size_t i = 0; i < p.size(); ++i) {
        p.data[i] = rng.uniform();
        y.data[i] = rng.coin() ? 1.0 : 0.0;
        a.data[i] = rng.coin() ? 1.0 : 0.0;
    }
    MaskedLossConfig w0;
    w0.bce_weight = 0.0;
    REQUIRE(masked_combined_loss(p, y, a, w0) == masked_dice_loss(p, y, a, w0));
    MaskedLossConfig w1;
    w1.bce_weight = 1.0;
    REQUIRE(masked_combined_loss(p, y, a, w1) == masked_bce_loss(p, y, a, w1));
}

TEST_CASE("dice is invariant under joint permutation") {
    Rng rng(23);
    const int n = 24;
    SliceTensor p(1, n), y(1, n);
    AllowMask a(1, n);
    for (int i = 0; i < n; ++i) {
        p.data[i] = rng.uniform();
        y.data[i] = rng.coin() ? 1.0 : 0.0;
        a.data[i] = rng.coin() ? 1.0 : 0.0;
    }
    double ref = masked_dice_loss(p, y, a);
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    for (int trial = 0; trial < 10; ++trial) {
        rng.shuffle(perm);
        SliceTensor p2(1, n), y2(1, n);
        AllowMask a2(1, n);
        for (int i = 0; i < n; ++i) {
            p2.data[i] = p.data[perm[i]];
            y2.data[i] = y.data[perm[i]];
            a2.data[i] = a.data[perm[i]];
        }
        REQUIRE(masked_dice_loss(p2, y2, a2) == Catch::Approx(ref).margin(1e-15));
    }
}

TEST_CASE("fully disjoint baseline prediction loses everything") {
    auto p = tensor(1, 2, {1, 0});
    auto y = tensor(1, 2, {0, 1});
    const double e = 1e-6;
    REQUIRE(dice_loss(p, y) == Catch::Approx(1.0 - e / (2.0 + e)).margin(1e-15));
}

TEST_CASE("input contracts are enforced") {
    auto p = tensor(2, 2, {0.5, 0.5, 0.5, 0.5});
    auto y = tensor(2, 2, {1, 0, 0, 0});
    AllowMask a(2, 2);

    auto bad_shape = tensor(2, 3, std::vector<double>(6, 0.5));
    REQUIRE_THROWS_AS(masked_dice_loss(bad_shape, y, a), value_error);

    auto bad_prob = tensor(2, 2, {1.5, 0.5, 0.5, 0.5});
    REQUIRE_THROWS_AS(masked_dice_loss(bad_prob, y, a), value_error);

    auto bad_target = tensor(2, 2, {1, 0.25, 0, 0});
    REQUIRE_THROWS_AS(masked_dice_loss(p, bad_target, a), value_error);

    auto bad_mask = mask(2, 2, {1, 0.5, 0, 1});
    REQUIRE_THROWS_AS(masked_dice_loss(p, y, bad_mask), value_error);
}

TEST_CASE("fully masked slice degrades to the smoothing terms, not NaN") {
    auto p = tensor(2, 2, {0.9, 0.1, 0.4, 0.6});
    auto y = tensor(2, 2, {1, 0, 1, 0});
    auto a = mask(2, 2, {0, 0, 0, 0});
    double d = masked_dice_loss(p, y, a);
    REQUIRE(std::isfinite(d));
    REQUIRE(d == 0.0);  // (0+eps)/(0+eps)
    REQUIRE(masked_bce_loss(p, y, a) == 0.0);
    auto g = masked_combined_loss_grad(p, y, a);
    for (double v : g.data) REQUIRE(v == 0.0);
}
