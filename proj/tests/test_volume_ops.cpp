#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "vmorph/volume_ops.hpp"

using namespace vmorph;

TEST_CASE("resampling a constant volume is constant") {
    Volume3D v(7, 5, 9, 0.8, 1.1, 2.3, VolumeKind::intensity);
    for (auto& d : v.data) d = 42.0;
    Volume3D r = resample(v, 1.0, 1.0, 1.0, ResampleMode::trilinear);
    REQUIRE(r.sx == 1.0);
    for (double d : r.data) REQUIRE(d == Catch::Approx(42.0).margin(1e-12));
}

TEST_CASE("downsampling halves dimensions at doubled spacing") {
    Volume3D v(10, 10, 10, 0.5, 0.5, 0.5, VolumeKind::integer_labels);
    for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] = static_cast<double>(i % 4);
    Volume3D r = resample(v, 1.0, 1.0, 1.0, ResampleMode::nearest);
    REQUIRE(r.nx == 5);
    REQUIRE(r.ny == 5);
    REQUIRE(r.nz == 5);

    std::set<double> in(v.data.begin(), v.data.end());
    for (double d : r.data) REQUIRE(in.count(d) == 1);  // no invented labels
}

TEST_CASE("identity resampling preserves data exactly") {
    Volume3D v(4, 3, 2, 1.0, 1.0, 1.0, VolumeKind::intensity);
    for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] = 0.37 * i;
    Volume3D r = resample(v, 1.0, 1.0, 1.0, ResampleMode::trilinear);
    REQUIRE(r.data == v.data);
}

TEST_CASE("trilinear resampling reproduces a linear ramp") {
    // values linear in x are reproduced exactly at interior sample points
    Volume3D v(8, 4, 4, 1.0, 1.0, 1.0, VolumeKind::intensity);
    for (int z = 0; z < 4; ++z)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 8; ++x) v.at(x, y, z) = 3.0 * (x + 0.5);
    Volume3D r = resample(v, 0.5, 1.0, 1.0, ResampleMode::trilinear);
    REQUIRE(r.nx == 16);
    for (int x = 2; x < 14; ++x) {
        double expect = 3.0 * ((x + 0.5) * 0.5);
        REQUIRE(r.at(x, 1, 1) == Catch::Approx(expect).margin(1e-12));
    }
}

TEST_CASE("trilinear interpolation of labels is rejected") {
    Volume3D v(4, 4, 4, 1.0, 1.0, 1.0, VolumeKind::integer_labels);
    REQUIRE_THROWS_AS(resample(v, 2.0, 2.0, 2.0, ResampleMode::trilinear), value_error);
    REQUIRE_NOTHROW(resample(v, 2.0, 2.0, 2.0, ResampleMode::nearest));
}

TEST_CASE("nearest resampling of binary masks stays binary") {
    Volume3D v(6, 6, 6, 1.0, 1.0, 1.0, VolumeKind::binary_mask);
    for (int z = 2; z < 4; ++z)
        for (int y = 2; y < 4; ++y)
            for (int x = 2; x < 4; ++x) v.at(x, y, z) = 1.0;
    Volume3D r = resample(v, 0.75, 0.75, 0.75, ResampleMode::nearest);
    REQUIRE_NOTHROW(r.validate());
}

TEST_CASE("intensity windowing maps the window ends to 0 and 1") {
    Volume3D v(5, 1, 1, 1, 1, 1, VolumeKind::intensity);
    v.data = {-150.0, 600.0, 225.0, -1000.0, 3000.0};
    Volume3D w = window_normalize(v, -150.0, 600.0);
    REQUIRE(w.data[0] == 0.0);
    REQUIRE(w.data[1] == 1.0);
    REQUIRE(w.data[2] == Catch::Approx(0.5));
    REQUIRE(w.data[3] == 0.0);  // clamped below
    REQUIRE(w.data[4] == 1.0);  // clamped above
    REQUIRE(w.kind == VolumeKind::intensity);

    REQUIRE_THROWS_AS(window_normalize(v, 600.0, -150.0), value_error);
}

TEST_CASE("eight-bit export scales by 255") {
    REQUIRE(export_u8(0.0) == 0);
    REQUIRE(export_u8(0.5) == 128);
    REQUIRE(export_u8(1.0) == 255);
    REQUIRE(export_u8(-3.0) == 0);
    REQUIRE(export_u8(9.0) == 255);
}
