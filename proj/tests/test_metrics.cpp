#include <catch2/catch_amalgamated.hpp>

#include "vmorph/metrics.hpp"

using namespace vmorph;

namespace {
SliceTensor tensor(int h, int w, std::vector<double> v) {
    SliceTensor t(h, w);
    t.data = std::move(v);
    return t;
}
}  // namespace

TEST_CASE("binarize uses a strict threshold") {
    auto p = tensor(1, 4, {0.4999, 0.5, 0.5001, 1.0});
    auto b = binarize(p, 0.5);
    REQUIRE(b.data == std::vector<double>{0, 0, 1, 1});
}

TEST_CASE("confusion counts on a known slice") {
    auto pred = tensor(2, 3, {1, 1, 0, 0, 1, 0});
    auto gt = tensor(2, 3, {1, 0, 1, 0, 1, 0});
    auto c = count_slice(pred, gt);
    REQUIRE(c.tp == 2);
    REQUIRE(c.fp == 1);
    REQUIRE(c.fn == 1);
    REQUIRE(c.tn == 2);
    REQUIRE(dice_score(c).value() == Catch::Approx(2.0 * 2 / (2 * 2 + 1 + 1)));
    REQUIRE(precision_score(c).value() == Catch::Approx(2.0 / 3.0));
    REQUIRE(recall_score(c).value() == Catch::Approx(2.0 / 3.0));
}

TEST_CASE("undefined ratios are absent rather than zero") {
    SliceCounts empty;  // no positives anywhere
    empty.tn = 10;
    REQUIRE(!dice_score(empty).has_value());
    REQUIRE(!precision_score(empty).has_value());
    REQUIRE(!recall_score(empty).has_value());

    SliceCounts only_fn;
    only_fn.fn = 4;
    REQUIRE(dice_score(only_fn).value() == 0.0);
    REQUIRE(!precision_score(only_fn).has_value());
    REQUIRE(recall_score(only_fn).value() == 0.0);
}

TEST_CASE("summary averages over slices with ground truth") {
    std::vector<SliceCounts> slices(4);
    // slice 0: dice 1.0
    slices[0].tp = 10;
    // slice 1: dice 0.5  (tp 5, fp 5, fn 5)
    slices[1].tp = 5;
    slices[1].fp = 5;
    slices[1].fn = 5;
    // slice 2: empty gt, empty pred: excluded from the mean
    slices[2].tn = 100;
    // slice 3: empty gt, nonempty pred: scored 0
    slices[3].fp = 3;
    slices[3].tn = 97;

    auto s = summarize(slices);
    REQUIRE(s.dice_slices == 3);
    REQUIRE(s.skipped_empty == 1);
    REQUIRE(s.dice_mean == Catch::Approx(0.5));
    // population sd over {1.0, 0.5, 0.0}
    REQUIRE(s.dice_sd == Catch::Approx(std::sqrt(1.0 / 6.0)));
    // pooled: tp 15, fp 8, fn 5
    REQUIRE(s.precision.value() == Catch::Approx(15.0 / 23.0));
    REQUIRE(s.recall.value() == Catch::Approx(15.0 / 20.0));
}

TEST_CASE("summary of an entirely empty study is an error") {
    std::vector<SliceCounts> slices(2);
    slices[0].tn = 5;
    slices[1].tn = 5;
    REQUIRE_THROWS_AS(summarize(slices), value_error);
}

TEST_CASE("dice is the harmonic mean of precision and recall") {
    SliceCounts c;
    c.tp = 7;
    c.fp = 3;
    c.fn = 2;
    double p = precision_score(c).value(), r = recall_score(c).value();
    REQUIRE(dice_score(c).value() == Catch::Approx(2 * p * r / (p + r)));
}

TEST_CASE("slice metric bundle and count consistency") {
    SliceTensor pred(2, 2), gt(2, 2);
    pred.data = {1, 1, 0, 0};
    gt.data = {1, 0, 1, 0};
    auto m = slice_metrics(pred, gt);
    REQUIRE(m.counts.tp + m.counts.fp == 2);  // |pred|
    REQUIRE(m.counts.tp + m.counts.fn == 2);  // |gt|
    REQUIRE(m.dice.value() == Catch::Approx(0.5));
}

TEST_CASE("aggregation options: sample std and macro averaging") {
    std::vector<SliceCounts> slices(2);
    slices[0].tp = 10;                      // dice 1, precision 1, recall 1
    slices[1].tp = 5;
    slices[1].fp = 5;
    slices[1].fn = 5;                       // dice 0.5, precision 0.5, recall 0.5

    AggregateOptions pop;
    REQUIRE(summarize(slices, pop).dice_sd == Catch::Approx(0.25));

    AggregateOptions samp;
    samp.sample_std = true;
    REQUIRE(summarize(slices, samp).dice_sd == Catch::Approx(0.25 * std::sqrt(2.0)));

    AggregateOptions macro;
    macro.macro_pr = true;
    auto s = summarize(slices, macro);
    REQUIRE(s.precision.value() == Catch::Approx(0.75));   // (1 + 0.5) / 2
    REQUIRE(s.recall.value() == Catch::Approx(0.75));
    // pooled for comparison: 15/(15+5) = 0.75 coincides; use asymmetric counts
    slices[1].fp = 15;
    auto micro = summarize(slices);
    REQUIRE(micro.precision.value() == Catch::Approx(15.0 / 30.0));
    auto mac2 = summarize(slices, macro);
    REQUIRE(mac2.precision.value() == Catch::Approx((1.0 + 0.25) / 2.0));
}

TEST_CASE("aggregate is permutation invariant") {
    std::vector<SliceCounts> slices(3);
    slices[0].tp = 4;
    slices[1].tp = 2;
    slices[1].fn = 2;
    slices[2].tp = 1;
    slices[2].fp = 3;
    auto a = summarize(slices);
    std::swap(slices[0], slices[2]);
    auto b = summarize(slices);
    REQUIRE(a.dice_mean == b.dice_mean);
    REQUIRE(a.dice_sd == b.dice_sd);
    REQUIRE(a.precision.value() == b.precision.value());
}

TEST_CASE("summary line layout") {
    EvalSummary s;
    s.dice_mean = 0.914;
    s.dice_sd = 0.033;
    s.dice_slices = 57;
    s.precision = 0.965;
    s.recall = 0.882;
    REQUIRE(format_summary(s) ==
            "dice 0.914 +/- 0.033 (n=57), precision 0.965, recall 0.882");

    EvalSummary none;
    REQUIRE(format_summary(none) == "dice 0.000 +/- 0.000 (n=0), precision n/a, recall n/a");
}
