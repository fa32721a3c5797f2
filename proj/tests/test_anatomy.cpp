#include <catch2/catch_amalgamated.hpp>

#include "vmorph/anatomy.hpp"

using namespace vmorph;

namespace {

OrganLabelMap small_map() {
    OrganLabelMap m;
    m.volume = Volume3D(4, 4, 3, 1, 1, 1, VolumeKind::integer_labels);
    m.label_table = {{1, "aorta"}, {2, "liver"}, {3, "spine"}};
    m.vascular_ids = {1};
    // slice 0: aorta blob; slice 1: liver + aorta; slice 2: spine only
    m.volume.at(1, 1, 0) = 1;
    m.volume.at(2, 1, 0) = 1;
    m.volume.at(1, 1, 1) = 1;
    m.volume.at(3, 3, 1) = 2;
    m.volume.at(0, 0, 2) = 3;
    m.volume.at(1, 0, 2) = 3;
    return m;
}

}  // namespace

TEST_CASE("exclusion mask merges non-vascular labels only") {
    auto m = small_map();
    Volume3D ex = build_exclusion_mask(m);
    REQUIRE(ex.kind == VolumeKind::binary_mask);
    REQUIRE(ex.at(1, 1, 0) == 0.0);  // aorta is vascular, never excluded
    REQUIRE(ex.at(3, 3, 1) == 1.0);  // liver
    REQUIRE(ex.at(0, 0, 2) == 1.0);  // spine
    REQUIRE(ex.at(2, 2, 0) == 0.0);  // background

    double total = 0.0;
    for (double v : ex.data) total += v;
    REQUIRE(total == 3.0);
}

TEST_CASE("label map validation catches inconsistencies") {
    auto m = small_map();
    m.vascular_ids.insert(9);  // not in the table
    REQUIRE_THROWS_AS(m.validate(), value_error);

    auto m2 = small_map();
    m2.volume.at(0, 3, 0) = 7;  // unknown label id in the volume
    REQUIRE_THROWS_AS(m2.validate(), value_error);
}

TEST_CASE("allow mask is the complement of the exclusion slice") {
    auto m = small_map();
    Volume3D ex = build_exclusion_mask(m);
    AllowMask a = allow_mask_for_slice(ex, 2);
    REQUIRE(a.height == 4);
    REQUIRE(a.width == 4);
    REQUIRE(a.data[0] == 0.0);  // spine voxel
    REQUIRE(a.data[1] == 0.0);
    REQUIRE(a.data[2] == 1.0);

    double total = 0.0;
    for (double v : a.data) total += v;
    REQUIRE(total == 14.0);
}

TEST_CASE("allow mask aligns to a finer target grid by nearest sampling") {
    auto m = small_map();
    Volume3D ex = build_exclusion_mask(m);
    AllowMask a = allow_mask_for_slice(ex, 2, 8, 8, 0.5, 0.5);
    REQUIRE(a.height == 8);
    REQUIRE(a.width == 8);
    // the 2x1 spine block doubles to a 4x2 zero block
    double total = 0.0;
    for (double v : a.data) total += v;
    REQUIRE(total == 64.0 - 8.0);

    // grids covering different physical extents are rejected
    REQUIRE_THROWS_AS(allow_mask_for_slice(ex, 2, 8, 8, 1.0, 1.0), value_error);
}

TEST_CASE("ground-truth override re-allows excluded positives") {
    auto m = small_map();
    Volume3D ex = build_exclusion_mask(m);
    AllowMask a = allow_mask_for_slice(ex, 2);
    Slice2D gt(4, 4, 1.0, 1.0);
    gt.at(0, 0) = 1.0;  // annotated vessel overlapping the spine label
    apply_gt_override(a, gt);
    REQUIRE(a.data[0] == 1.0);
    REQUIRE(a.data[1] == 0.0);  // untouched

    Slice2D bad(3, 3, 1.0, 1.0);
    REQUIRE_THROWS_AS(apply_gt_override(a, bad), value_error);
}

TEST_CASE("slice filter keeps aorta-bearing slices in order") {
    auto m = small_map();
    REQUIRE(filter_slices_by_aorta(m) == std::vector<int>{0, 1});
    REQUIRE(filter_slices_by_aorta(m, 2) == std::vector<int>{0});

    auto no_aorta = small_map();
    no_aorta.label_table = {{1, "artery"}, {2, "liver"}, {3, "spine"}};
    REQUIRE_THROWS_AS(filter_slices_by_aorta(no_aorta), config_error);
}
