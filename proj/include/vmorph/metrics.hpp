#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "vmorph/masked_loss.hpp"

namespace vmorph {

/// Confusion counts for one binary slice.
struct SliceCounts {
    long long tp = 0, fp = 0, fn = 0, tn = 0;

    long long gt_positives() const { return tp + fn; }
    long long pred_positives() const { return tp + fp; }
};

inline SliceTensor binarize(const SliceTensor& prob, double threshold = 0.5) {
    SliceTensor out(prob.height, prob.width);
    for (std::size_t i = 0; i < prob.data.size(); ++i)
        out.data[i] = prob.data[i] > threshold ? 1.0 : 0.0;  // strictly greater
    return out;
}

inline SliceCounts count_slice(const SliceTensor& pred_bin, const SliceTensor& target) {
    if (pred_bin.height != target.height || pred_bin.width != target.width)
        throw value_error("count_slice: shape mismatch");
    SliceCounts c;
    for (std::size_t i = 0; i < pred_bin.data.size(); ++i) {
        bool p = pred_bin.data[i] != 0.0, y = target.data[i] != 0.0;
        if (p && y) ++c.tp;
        else if (p && !y) ++c.fp;
        else if (!p && y) ++c.fn;
        else ++c.tn;
    }
    return c;
}

/// Ratios are absent when their denominator is zero rather than coerced to a
/// sentinel value.
inline std::optional<double> dice_score(const SliceCounts& c) {
    long long denom = 2 * c.tp + c.fp + c.fn;
    if (denom == 0) return std::nullopt;
    return 2.0 * c.tp / static_cast<double>(denom);
}

inline std::optional<double> precision_score(const SliceCounts& c) {
    if (c.tp + c.fp == 0) return std::nullopt;
    return static_cast<double>(c.tp) / (c.tp + c.fp);
}

inline std::optional<double> recall_score(const SliceCounts& c) {
    if (c.tp + c.fn == 0) return std::nullopt;
    return static_cast<double>(c.tp) / (c.tp + c.fn);
}

/// Per-slice metric bundle.
struct SliceMetrics {
    std::optional<double> dice, precision, recall;
    SliceCounts counts;
};

inline SliceMetrics slice_metrics(const SliceTensor& pred_bin, const SliceTensor& target) {
    SliceMetrics m;
    m.counts = count_slice(pred_bin, target);
    m.dice = dice_score(m.counts);
    m.precision = precision_score(m.counts);
    m.recall = recall_score(m.counts);
    return m;
}

struct AggregateOptions {
    bool sample_std = false;  // divide variance by n-1 instead of n
    bool macro_pr = false;    // mean of per-slice precision/recall instead of pooled counts
};

/// Slice-set summary: Dice mean/sd over slices with nonempty ground truth,
/// precision/recall pooled over all voxels (or macro-averaged on request).
struct EvalSummary {
    double dice_mean = 0.0;
    double dice_sd = 0.0;
    int dice_slices = 0;         // slices entering the mean
    int skipped_empty = 0;       // empty-GT, empty-prediction slices
    std::optional<double> precision;
    std::optional<double> recall;
    SliceCounts pooled;
};

inline EvalSummary summarize(const std::vector<SliceCounts>& per_slice,
                             const AggregateOptions& opt = {}) {
    EvalSummary s;
    std::vector<double> dices;
    double macro_p = 0.0, macro_r = 0.0;
    int np = 0, nr = 0;
    for (const auto& c : per_slice) {
        s.pooled.tp += c.tp;
        s.pooled.fp += c.fp;
        s.pooled.fn += c.fn;
        s.pooled.tn += c.tn;
        if (c.gt_positives() == 0) {
            if (c.pred_positives() == 0) ++s.skipped_empty;
            else dices.push_back(0.0);  // hallucinated structure on an empty slice
        } else {
            dices.push_back(dice_score(c).value_or(0.0));
        }
        if (auto p = precision_score(c)) {
            macro_p += *p;
            ++np;
        }
        if (auto r = recall_score(c)) {
            macro_r += *r;
            ++nr;
        }
    }
    if (dices.empty())
        throw value_error("summarize: no slice has ground truth or predictions to score");
    s.dice_slices = static_cast<int>(dices.size());
    double sum = 0.0;
    for (double d : dices) sum += d;
    s.dice_mean = sum / dices.size();
    double var = 0.0;
    for (double d : dices) var += (d - s.dice_mean) * (d - s.dice_mean);
    std::size_t denom = opt.sample_std ? dices.size() - 1 : dices.size();
    s.dice_sd = denom > 0 ? std::sqrt(var / denom) : 0.0;

    if (opt.macro_pr) {
        if (np) s.precision = macro_p / np;
        if (nr) s.recall = macro_r / nr;
    } else {
        s.precision = precision_score(s.pooled);
        s.recall = recall_score(s.pooled);
    }
    return s;
}

/// "0.914 +/- 0.033, precision 0.965, recall 0.882" style line.
inline std::string format_summary(const EvalSummary& s) {
    char buf[160];
    auto opt = [](const std::optional<double>& v) {
        if (!v) return std::string("n/a");
        char b[32];
        std::snprintf(b, sizeof(b), "%.3f", *v);
        return std::string(b);
    };
    std::snprintf(buf, sizeof(buf), "dice %.3f +/- %.3f (n=%d), precision %s, recall %s",
                  s.dice_mean, s.dice_sd, s.dice_slices, opt(s.precision).c_str(),
                  opt(s.recall).c_str());
    return buf;
}

}  // namespace vmorph
