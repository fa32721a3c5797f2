#pragma once

#include <algorithm>
#include <cmath>

#include "vmorph/volume.hpp"

namespace vmorph {

enum class ResampleMode { trilinear, nearest };

namespace detail {

inline int clamp_index(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

/// Trilinear sample at continuous voxel coordinates (voxel-center frame);
/// coordinates are clamped to the valid center range, so values beyond the
/// border replicate the edge.
inline double sample_trilinear(const Volume3D& v, double x, double y, double z) {
    x = std::clamp(x, 0.0, static_cast<double>(v.nx - 1));
    y = std::clamp(y, 0.0, static_cast<double>(v.ny - 1));
    z = std::clamp(z, 0.0, static_cast<double>(v.nz - 1));
    int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y)),
        z0 = static_cast<int>(std::floor(z));
    int x1 = std::min(x0 + 1, v.nx - 1), y1 = std::min(y0 + 1, v.ny - 1),
        z1 = std::min(z0 + 1, v.nz - 1);
    double fx = x - x0, fy = y - y0, fz = z - z0;
    auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
    double c00 = lerp(v.at(x0, y0, z0), v.at(x1, y0, z0), fx);
    double c10 = lerp(v.at(x0, y1, z0), v.at(x1, y1, z0), fx);
    double c01 = lerp(v.at(x0, y0, z1), v.at(x1, y0, z1), fx);
    double c11 = lerp(v.at(x0, y1, z1), v.at(x1, y1, z1), fx);
    return lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz);
}

inline double sample_nearest(const Volume3D& v, double x, double y, double z) {
    int xi = clamp_index(static_cast<int>(std::lround(x)), v.nx);
    int yi = clamp_index(static_cast<int>(std::lround(y)), v.ny);
    int zi = clamp_index(static_cast<int>(std::lround(z)), v.nz);
    return v.at(xi, yi, zi);
}

}  // namespace detail

/// Resample to a new voxel spacing. Output dims are round(n * s_in / s_out)
/// with a minimum of 1 per axis; voxel centers follow the half-voxel-center
/// convention relative to the shared origin. Nearest mode never introduces
/// values absent from the input; trilinear is rejected on label volumes.
inline Volume3D resample(const Volume3D& vol, double tx, double ty, double tz,
                         ResampleMode mode) {
    if (!(tx > 0.0) || !(ty > 0.0) || !(tz > 0.0))
        throw value_error("resample: target spacing must be > 0");
    if (mode == ResampleMode::trilinear && vol.kind == VolumeKind::integer_labels)
        throw value_error("resample: trilinear interpolation is invalid on integer-labels volumes");
    if (tx == vol.sx && ty == vol.sy && tz == vol.sz) return vol;

    auto out_dim = [](int n, double s_in, double s_out) {
        return std::max(1, static_cast<int>(std::lround(n * s_in / s_out)));
    };
    Volume3D out(out_dim(vol.nx, vol.sx, tx), out_dim(vol.ny, vol.sy, ty),
                 out_dim(vol.nz, vol.sz, tz), tx, ty, tz, vol.kind);
    out.origin = vol.origin;

    for (int z = 0; z < out.nz; ++z) {
        double zc = ((z + 0.5) * tz) / vol.sz - 0.5;
        for (int y = 0; y < out.ny; ++y) {
            double yc = ((y + 0.5) * ty) / vol.sy - 0.5;
            for (int x = 0; x < out.nx; ++x) {
                double xc = ((x + 0.5) * tx) / vol.sx - 0.5;
                out.at(x, y, z) = (mode == ResampleMode::trilinear)
                                      ? detail::sample_trilinear(vol, xc, yc, zc)
                                      : detail::sample_nearest(vol, xc, yc, zc);
            }
        }
    }
    return out;
}

inline Volume3D resample(const Volume3D& vol, double iso_spacing, ResampleMode mode) {
    return resample(vol, iso_spacing, iso_spacing, iso_spacing, mode);
}

/// Maps a HU window [lo, hi] to [0, 1] with clamping:
/// v' = clamp((v - lo) / (hi - lo), 0, 1). Values stay in [0,1] internally;
/// scaling to [0,255] is an export concern (see export_u8).
inline Volume3D window_normalize(const Volume3D& vol, double lo_hu, double hi_hu) {
    if (!(lo_hu < hi_hu)) throw value_error("window_normalize: requires lo < hi");
    Volume3D out = vol;
    out.kind = VolumeKind::intensity;
    const double inv = 1.0 / (hi_hu - lo_hu);
    for (double& v : out.data) v = std::clamp((v - lo_hu) * inv, 0.0, 1.0);
    return out;
}

/// [0,1]-normalized value to the exported 8-bit raster convention.
inline unsigned char export_u8(double v01) {
    return static_cast<unsigned char>(std::lround(std::clamp(v01, 0.0, 1.0) * 255.0));
}

}  // namespace vmorph
