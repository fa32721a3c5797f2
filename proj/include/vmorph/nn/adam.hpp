#pragma once

#include <cmath>
#include <vector>

#include "vmorph/nn/layers.hpp"

namespace vmorph::nn {

/// Adam with bias correction over a fixed parameter registry.
struct Adam {
    double lr = 1e-4;
    double beta1 = 0.9, beta2 = 0.999;
    double eps = 1e-8;

    std::vector<double> m, v;
    long long t = 0;

    explicit Adam(std::size_t n_params, double lr_ = 1e-4)
        : lr(lr_), m(n_params, 0.0), v(n_params, 0.0) {}

    void step(const std::vector<ParamRef>& params) {
        std::size_t total = 0;
        for (const auto& p : params) total += p.size;
        if (total != m.size()) throw value_error("Adam: parameter count changed");
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        std::size_t off = 0;
        for (const auto& p : params) {
            for (std::size_t i = 0; i < p.size; ++i, ++off) {
                const double g = p.grad[i];
                m[off] = beta1 * m[off] + (1.0 - beta1) * g;
                v[off] = beta2 * v[off] + (1.0 - beta2) * g * g;
                const double mhat = m[off] / bc1;
                const double vhat = v[off] / bc2;
                p.value[i] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }
};

}  // namespace vmorph::nn
