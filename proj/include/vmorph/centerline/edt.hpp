#pragma once

#include <limits>

#include "vmorph/volume.hpp"

namespace vmorph {

namespace detail {

// 1D lower-envelope pass of the exact squared distance transform
// (Felzenszwalb & Huttenlocher), generalized to physical sample spacing.
// out[i] = min_j ((i - j) * spacing)^2 + f[j].
inline void edt_pass(const std::vector<double>& f, std::vector<double>& out, double spacing,
                     std::vector<int>& v, std::vector<double>& z) {
    const int n = static_cast<int>(f.size());
    const double inf = std::numeric_limits<double>::infinity();
    v.resize(n);
    z.resize(n + 1);
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[q] == inf) continue;
        double xq = q * spacing;
        double s;
        while (true) {
            if (k < 0) { s = -inf; break; }
            double xr = v[k] * spacing;
            s = ((f[q] + xq * xq) - (f[v[k]] + xr * xr)) / (2.0 * (xq - xr));
            if (s > z[k]) break;
            --k;
        }
        v[++k] = q;
        z[k] = s;
        z[k + 1] = inf;
    }
    if (k < 0) {  // nothing finite in this line
        std::fill(out.begin(), out.end(), inf);
        return;
    }
    int j = 0;
    for (int i = 0; i < n; ++i) {
        double xi = i * spacing;
        while (z[j + 1] < xi) ++j;
        double d = (i - v[j]) * spacing;
        out[i] = d * d + f[v[j]];
    }
}

}  // namespace detail

/// A volume of distances in mm; conceptually d(x) = how far the voxel center
/// at x is from the nearest background voxel center (0 on the background).
using DistanceField = Volume3D;

/// Exact anisotropy-aware Euclidean distance transform of a binary mask.
/// Separable squared-distance passes keep it O(n) per axis and bit-for-bit
/// equal to the brute-force definition. The grid is not padded: a mask with no
/// background voxel has no defined distance and is rejected.
inline DistanceField distance_transform(const Volume3D& mask) {
    for (double v : mask.data)
        if (v != 0.0 && v != 1.0)
            throw value_error("distance_transform: input is not a binary mask");
    bool any_background = false, any_foreground = false;
    for (double v : mask.data) (v == 0.0 ? any_background : any_foreground) = true;
    if (!any_background && any_foreground)
        throw value_error("distance_transform: mask fills the grid, no wall to measure from");

    const double inf = std::numeric_limits<double>::infinity();
    DistanceField out = mask;
    out.kind = VolumeKind::intensity;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = mask.data[i] == 0.0 ? 0.0 : inf;

    const int nx = mask.nx, ny = mask.ny, nz = mask.nz;
    std::vector<double> line, result;
    std::vector<int> hull;
    std::vector<double> breaks;
    auto run_axis = [&](int n, double spacing, auto index_of) {
        line.resize(n);
        result.resize(n);
        const std::size_t lines = out.data.size() / n;
        for (std::size_t l = 0; l < lines; ++l) {
            for (int i = 0; i < n; ++i) line[i] = out.data[index_of(l, i)];
            detail::edt_pass(line, result, spacing, hull, breaks);
            for (int i = 0; i < n; ++i) out.data[index_of(l, i)] = result[i];
        }
    };
    run_axis(nx, mask.sx, [&](std::size_t l, int i) { return l * nx + i; });
    run_axis(ny, mask.sy, [&](std::size_t l, int i) {
        return (l / nx) * static_cast<std::size_t>(nx) * ny + i * static_cast<std::size_t>(nx) +
               (l % nx);
    });
    run_axis(nz, mask.sz, [&](std::size_t l, int i) {
        return l + static_cast<std::size_t>(i) * nx * ny;
    });

    for (double& v : out.data) v = std::sqrt(v);
    return out;
}

}  // namespace vmorph
