#pragma once

#include <cstddef>
#include <vector>

#include "vmorph/error.hpp"

namespace vmorph::nn {

/// Minibatch tensor, NCHW, w-fastest.
struct Tensor4 {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<double> data;

    Tensor4() = default;
    Tensor4(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_),
          data(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.0) {
        if (n_ <= 0 || c_ <= 0 || h_ <= 0 || w_ <= 0)
            throw value_error("Tensor4: dimensions must be positive");
    }

    std::size_t index(int in, int ic, int iy, int ix) const {
        return ((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix;
    }
    double& at(int in, int ic, int iy, int ix) { return data[index(in, ic, iy, ix)]; }
    double at(int in, int ic, int iy, int ix) const { return data[index(in, ic, iy, ix)]; }

    // contiguous HxW plane of one sample/channel
    double* plane(int in, int ic) { return data.data() + index(in, ic, 0, 0); }
    const double* plane(int in, int ic) const { return data.data() + index(in, ic, 0, 0); }

    bool same_shape(const Tensor4& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
    std::size_t size() const { return data.size(); }
    void zero() { std::fill(data.begin(), data.end(), 0.0); }
};

inline Tensor4 concat_channels(const Tensor4& a, const Tensor4& b) {
    if (a.n != b.n || a.h != b.h || a.w != b.w)
        throw value_error("concat_channels: mismatched shapes");
    Tensor4 out(a.n, a.c + b.c, a.h, a.w);
    const std::size_t plane = static_cast<std::size_t>(a.h) * a.w;
    for (int in = 0; in < a.n; ++in) {
        for (int ic = 0; ic < a.c; ++ic)
            std::copy_n(a.plane(in, ic), plane, out.plane(in, ic));
        for (int ic = 0; ic < b.c; ++ic)
            std::copy_n(b.plane(in, ic), plane, out.plane(in, a.c + ic));
    }
    return out;
}

inline void split_channels(const Tensor4& joint, Tensor4& a, Tensor4& b) {
    if (joint.n != a.n || joint.n != b.n || joint.c != a.c + b.c || joint.h != a.h ||
        joint.w != a.w || a.h != b.h || a.w != b.w)
        throw value_error("split_channels: mismatched shapes");
    const std::size_t plane = static_cast<std::size_t>(a.h) * a.w;
    for (int in = 0; in < joint.n; ++in) {
        for (int ic = 0; ic < a.c; ++ic)
            std::copy_n(joint.plane(in, ic), plane, a.plane(in, ic));
        for (int ic = 0; ic < b.c; ++ic)
            std::copy_n(joint.plane(in, a.c + ic), plane, b.plane(in, ic));
    }
}

}  // namespace vmorph::nn
