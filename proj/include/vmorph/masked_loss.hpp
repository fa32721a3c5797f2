#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "vmorph/anatomy.hpp"
#include "vmorph/error.hpp"

namespace vmorph {

/// Flat HxW tensor used at the loss boundary. Predictions live in [0,1],
/// targets in {0,1}.
struct SliceTensor {
    int height = 0, width = 0;
    std::vector<double> data;

    SliceTensor() = default;
    SliceTensor(int h, int w, double fill = 0.0)
        : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

    double& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
    double at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
    std::size_t size() const { return data.size(); }
};

struct MaskedLossConfig {
    double bce_weight = 0.5;    // w in  L = w*BCE + (1-w)*Dice
    double epsilon = 1e-6;      // smoothing in both ratio denominators
    double prob_clamp = 1e-7;   // log-argument guard for BCE
    bool baseline_mode = false; // ignore the allow mask, treat every pixel as allowed
};

namespace detail {

inline void check_loss_shapes(const SliceTensor& pred, const SliceTensor& target,
                              const AllowMask& allow) {
    if (pred.height != target.height || pred.width != target.width ||
        pred.height != allow.height || pred.width != allow.width)
        throw value_error("masked loss: prediction, target, and allow mask shapes differ");
    if (pred.data.empty()) throw value_error("masked loss: empty tensors");
    for (double p : pred.data)
        if (!(p >= 0.0 && p <= 1.0)) throw value_error("masked loss: prediction outside [0,1]");
    for (double y : target.data)
        if (y != 0.0 && y != 1.0) throw value_error("masked loss: target not binary");
    for (double a : allow.data)
        if (a != 0.0 && a != 1.0) throw value_error("masked loss: allow mask not binary");
}

struct DiceSums {
    double apy = 0.0, ap = 0.0, ay = 0.0;
};

inline AllowMask ones_like(const SliceTensor& t) { return AllowMask(t.height, t.width, 1.0); }

inline DiceSums dice_sums(const SliceTensor& pred, const SliceTensor& target,
                          const AllowMask& allow) {
    DiceSums s;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        if (allow.data[i] == 0.0) continue;  // skip, not multiply: keeps masking bit-exact
        s.apy += pred.data[i] * target.data[i];
        s.ap += pred.data[i];
        s.ay += target.data[i];
    }
    return s;
}

}  // namespace detail

/// Soft Dice restricted to allowed pixels:
///   1 - (2*sum(A*P*Y) + eps) / (sum(A*P) + sum(A*Y) + eps)
inline double masked_dice_loss(const SliceTensor& pred, const SliceTensor& target,
                               const AllowMask& allow, const MaskedLossConfig& cfg = {}) {
    if (cfg.baseline_mode) {
        MaskedLossConfig c = cfg;
        c.baseline_mode = false;
        return masked_dice_loss(pred, target, detail::ones_like(pred), c);
    }
    detail::check_loss_shapes(pred, target, allow);
    auto s = detail::dice_sums(pred, target, allow);
    return 1.0 - (2.0 * s.apy + cfg.epsilon) / (s.ap + s.ay + cfg.epsilon);
}

/// Binary cross entropy averaged over allowed pixels, with predictions
/// clamped to [delta, 1-delta] before the logs.
inline double masked_bce_loss(const SliceTensor& pred, const SliceTensor& target,
                              const AllowMask& allow, const MaskedLossConfig& cfg = {}) {
    if (cfg.baseline_mode) {
        MaskedLossConfig c = cfg;
        c.baseline_mode = false;
        return masked_bce_loss(pred, target, detail::ones_like(pred), c);
    }
    detail::check_loss_shapes(pred, target, allow);
    const double d = cfg.prob_clamp;
    double num = 0.0, denom = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        if (allow.data[i] == 0.0) continue;
        double p = std::clamp(pred.data[i], d, 1.0 - d);
        double y = target.data[i];
        num += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
        denom += 1.0;
    }
    return num / (denom + cfg.epsilon);
}

/// w*BCE + (1-w)*Dice.
inline double masked_combined_loss(const SliceTensor& pred, const SliceTensor& target,
                                   const AllowMask& allow, const MaskedLossConfig& cfg = {}) {
    return cfg.bce_weight * masked_bce_loss(pred, target, allow, cfg) +
           (1.0 - cfg.bce_weight) * masked_dice_loss(pred, target, allow, cfg);
}

/// Analytic d(combined)/dP. Exactly zero at disallowed pixels and where the
/// BCE clamp is active (the Dice term still contributes there).
inline SliceTensor masked_combined_loss_grad(const SliceTensor& pred, const SliceTensor& target,
                                             const AllowMask& allow,
                                             const MaskedLossConfig& cfg = {}) {
    if (cfg.baseline_mode) {
        MaskedLossConfig c = cfg;
        c.baseline_mode = false;
        return masked_combined_loss_grad(pred, target, detail::ones_like(pred), c);
    }
    detail::check_loss_shapes(pred, target, allow);
    auto s = detail::dice_sums(pred, target, allow);
    const double denom = s.ap + s.ay + cfg.epsilon;
    const double numer = 2.0 * s.apy + cfg.epsilon;
    const double d = cfg.prob_clamp;

    double sum_a = 0.0;
    for (double a : allow.data) sum_a += a;
    const double bce_scale = 1.0 / (sum_a + cfg.epsilon);

    SliceTensor g(pred.height, pred.width);
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        if (allow.data[i] == 0.0) continue;
        const double p = pred.data[i];
        const double y = target.data[i];

        // quotient rule on the Dice ratio
        double g_dice = -(2.0 * y * denom - numer) / (denom * denom);

        double g_bce = 0.0;
        if (p > d && p < 1.0 - d)
            g_bce = (-y / p + (1.0 - y) / (1.0 - p)) * bce_scale;

        g.data[i] = cfg.bce_weight * g_bce + (1.0 - cfg.bce_weight) * g_dice;
    }
    return g;
}

/// Unmasked soft Dice, the reference training objective. Identical to
/// masked_dice_loss with an all-ones allow mask.
inline double dice_loss(const SliceTensor& pred, const SliceTensor& target,
                        const MaskedLossConfig& cfg = {}) {
    AllowMask all(pred.height, pred.width, 1.0);
    return masked_dice_loss(pred, target, all, cfg);
}

inline SliceTensor dice_loss_grad(const SliceTensor& pred, const SliceTensor& target,
                                  const MaskedLossConfig& cfg = {}) {
    AllowMask all(pred.height, pred.width, 1.0);
    MaskedLossConfig pure = cfg;
    pure.bce_weight = 0.0;
    return masked_combined_loss_grad(pred, target, all, pure);
}

}  // namespace vmorph
