#pragma once

#include "vmorph/mesh/trimesh.hpp"

namespace vmorph {

struct Frame {
    Vec3 tangent;
    Vec3 normal;    // parallel-transported, unit, perpendicular to tangent
    Vec3 binormal;  // tangent x normal
};

namespace detail {

inline Vec3 normalized(const Vec3& v, const char* what) {
    double n = norm(v);
    if (!(n > 0.0)) throw value_error(std::string(what) + ": zero-length vector");
    return (1.0 / n) * v;
}

inline Vec3 any_perpendicular(const Vec3& t) {
    // seed with the axis least aligned with t to stay well-conditioned
    double ax = std::abs(t[0]), ay = std::abs(t[1]), az = std::abs(t[2]);
    Vec3 seed = ax <= ay && ax <= az ? Vec3{1, 0, 0}
                : ay <= az          ? Vec3{0, 1, 0}
                                    : Vec3{0, 0, 1};
    return normalized(seed - dot(seed, t) * t, "frame seed");
}

}  // namespace detail

/// Central-difference unit tangents (one-sided at the ends) plus a
/// parallel-transported normal pair: each normal is the previous one made
/// perpendicular to the new tangent, so the frame never flips between
/// consecutive points. Tangents are estimated on a moving-average copy of the
/// path (window +-`window` points) so sub-voxel backtracking jitter does not
/// tilt the cut planes; window 0 differentiates the raw points.
inline std::vector<Frame> local_frames(const std::vector<Vec3>& points, int window = 2) {
    const int n = static_cast<int>(points.size());
    if (n < 3) throw value_error("local_frames: need at least 3 points");
    if (window < 0) throw value_error("local_frames: negative smoothing window");
    for (int i = 1; i < n; ++i)
        if (norm(points[i] - points[i - 1]) == 0.0)
            throw value_error("local_frames: repeated consecutive points");

    std::vector<Vec3> sm(n);
    for (int i = 0; i < n; ++i) {
        const int lo = std::max(0, i - window), hi = std::min(n - 1, i + window);
        Vec3 acc = {0, 0, 0};
        for (int j = lo; j <= hi; ++j) acc = acc + points[j];
        sm[i] = (1.0 / (hi - lo + 1)) * acc;
    }

    std::vector<Frame> frames(n);
    for (int i = 0; i < n; ++i) {
        Vec3 d = i == 0 ? sm[1] - sm[0] : i == n - 1 ? sm[n - 1] - sm[n - 2] : sm[i + 1] - sm[i - 1];
        if (norm(d) == 0.0)  // averaging collapsed the ends of a tight loop
            d = points[std::min(i + 1, n - 1)] - points[std::max(i - 1, 0)];
        frames[i].tangent = detail::normalized(d, "local_frames tangent");
    }
    frames[0].normal = detail::any_perpendicular(frames[0].tangent);
    frames[0].binormal = cross(frames[0].tangent, frames[0].normal);
    for (int i = 1; i < n; ++i) {
        const Vec3& t = frames[i].tangent;
        Vec3 n_prev = frames[i - 1].normal;
        Vec3 projected = n_prev - dot(n_prev, t) * t;
        if (norm(projected) < 1e-12)  // right-angle kink: restart the transport
            projected = detail::any_perpendicular(t);
        frames[i].normal = detail::normalized(projected, "local_frames normal");
        frames[i].binormal = cross(t, frames[i].normal);
    }
    return frames;
}

}  // namespace vmorph
