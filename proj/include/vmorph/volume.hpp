#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "vmorph/error.hpp"

namespace vmorph {

enum class VolumeKind { intensity, binary_mask, integer_labels };

inline const char* to_string(VolumeKind k) {
    switch (k) {
        case VolumeKind::intensity: return "intensity";
        case VolumeKind::binary_mask: return "binary-mask";
        case VolumeKind::integer_labels: return "integer-labels";
    }
    return "?";
}

/// Axial 2D slice. Data is x-fastest: data[y * width + x].
struct Slice2D {
    int height = 0;  // pixel rows (y)
    int width = 0;   // pixel columns (x)
    double sx = 1.0, sy = 1.0;  // mm/pixel
    std::vector<double> data;

    Slice2D() = default;
    Slice2D(int h, int w, double sx_ = 1.0, double sy_ = 1.0, double fill = 0.0)
        : height(h), width(w), sx(sx_), sy(sy_),
          data(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill) {}

    std::size_t size() const { return data.size(); }
    double& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
    double at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

/// Scalar voxel grid with spacing/origin metadata. Voxels are stored x-fastest
/// (NIfTI payload order): data[(z * ny + y) * nx + x]. Values are kept as
/// 64-bit floats regardless of on-disk datatype.
struct Volume3D {
    int nx = 0, ny = 0, nz = 0;
    double sx = 1.0, sy = 1.0, sz = 1.0;            // mm/voxel
    std::array<double, 3> origin = {0.0, 0.0, 0.0};  // mm
    VolumeKind kind = VolumeKind::intensity;
    std::vector<double> data;

    Volume3D() = default;
    Volume3D(int nx_, int ny_, int nz_, double sx_ = 1.0, double sy_ = 1.0, double sz_ = 1.0,
             VolumeKind kind_ = VolumeKind::intensity, double fill = 0.0)
        : nx(nx_), ny(ny_), nz(nz_), sx(sx_), sy(sy_), sz(sz_), kind(kind_),
          data(static_cast<std::size_t>(nx_) * ny_ * nz_, fill) {
        check_geometry();
    }

    std::size_t size() const { return data.size(); }

    std::size_t index(int x, int y, int z) const {
        return (static_cast<std::size_t>(z) * ny + y) * nx + x;
    }

    double& at(int x, int y, int z) { return data[index(x, y, z)]; }
    double at(int x, int y, int z) const { return data[index(x, y, z)]; }

    bool in_bounds(int x, int y, int z) const {
        return x >= 0 && x < nx && y >= 0 && y < ny && z >= 0 && z < nz;
    }

    /// World coordinate of a voxel center, half-voxel-center convention.
    std::array<double, 3> voxel_center(int x, int y, int z) const {
        return {origin[0] + (x + 0.5) * sx, origin[1] + (y + 0.5) * sy,
                origin[2] + (z + 0.5) * sz};
    }

    double voxel_volume() const { return sx * sy * sz; }

    void check_geometry() const {
        if (nx < 1 || ny < 1 || nz < 1)
            throw value_error("Volume3D: dims must be >= 1 per axis");
        if (!(sx > 0.0) || !(sy > 0.0) || !(sz > 0.0))
            throw value_error("Volume3D: spacing must be > 0 per axis");
        if (data.size() != static_cast<std::size_t>(nx) * ny * nz)
            throw value_error("Volume3D: data length does not match dims");
    }

    /// Full invariant check including per-kind value constraints.
    void validate() const {
        check_geometry();
        for (double v : data)
            if (!std::isfinite(v))
                throw value_error("Volume3D: non-finite voxel value");
        if (kind == VolumeKind::binary_mask) {
            for (double v : data)
                if (v != 0.0 && v != 1.0)
                    throw value_error("Volume3D: binary-mask holds a value outside {0,1}");
        } else if (kind == VolumeKind::integer_labels) {
            for (double v : data)
                if (v < 0.0 || v != std::floor(v))
                    throw value_error("Volume3D: integer-labels holds a non-integer or negative value");
        }
    }
};

/// Axial plane z=index with in-plane spacing (sx, sy).
inline Slice2D extract_slice(const Volume3D& vol, int index) {
    if (index < 0 || index >= vol.nz)
        throw value_error("extract_slice: slice index " + std::to_string(index) +
                          " out of range [0, " + std::to_string(vol.nz) + ")");
    Slice2D s(vol.ny, vol.nx, vol.sx, vol.sy);
    const std::size_t plane = static_cast<std::size_t>(vol.nx) * vol.ny;
    std::copy(vol.data.begin() + index * plane, vol.data.begin() + (index + 1) * plane,
              s.data.begin());
    return s;
}

/// Writes a slice back into the axial plane z=index.
inline void insert_slice(Volume3D& vol, const Slice2D& s, int index) {
    if (index < 0 || index >= vol.nz)
        throw value_error("insert_slice: slice index out of range");
    if (s.width != vol.nx || s.height != vol.ny)
        throw value_error("insert_slice: slice shape does not match volume");
    const std::size_t plane = static_cast<std::size_t>(vol.nx) * vol.ny;
    std::copy(s.data.begin(), s.data.end(), vol.data.begin() + index * plane);
}

}  // namespace vmorph
