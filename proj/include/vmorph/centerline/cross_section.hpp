#pragma once

#include "vmorph/centerline/frames.hpp"
#include "vmorph/mesh/trimesh.hpp"

namespace vmorph {

/// One closed mesh-plane intersection loop, expressed both in 3D and in the
/// cutting plane's 2D basis (centerline point at the origin).
struct CrossSection {
    std::vector<Vec3> loop_mm;
    std::vector<std::array<double, 2>> loop_2d;
    double area_mm2 = 0.0;
};

namespace detail {

inline bool point_in_polygon(const std::vector<std::array<double, 2>>& poly, double px,
                             double py) {
    bool in = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const auto& a = poly[i];
        const auto& b = poly[j];
        if ((a[1] > py) != (b[1] > py) &&
            px < (b[0] - a[0]) * (py - a[1]) / (b[1] - a[1]) + a[0])
            in = !in;
    }
    return in;
}

inline double shoelace_area(const std::vector<std::array<double, 2>>& poly) {
    double twice = 0.0;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++)
        twice += poly[j][0] * poly[i][1] - poly[i][0] * poly[j][1];
    return 0.5 * std::abs(twice);
}

inline double point_segment_distance_2d(double px, double py, const std::array<double, 2>& a,
                                        const std::array<double, 2>& b) {
    const double vx = b[0] - a[0], vy = b[1] - a[1];
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0 ? ((px - a[0]) * vx + (py - a[1]) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = px - (a[0] + t * vx), dy = py - (a[1] + t * vy);
    return std::hypot(dx, dy);
}

}  // namespace detail

/// Cuts the mesh with the plane through `point` orthogonal to `tangent` and
/// returns the loop that encloses the point (or the nearest loop if none
/// does). Crossing points are keyed by mesh edge, so adjacent triangles chain
/// into closed polylines; an open chain means the mesh is not watertight.
inline CrossSection cross_section(const TriMesh& mesh, const Vec3& point, const Vec3& tangent) {
    const Vec3 t = detail::normalized(tangent, "cross_section tangent");
    const Vec3 u = detail::any_perpendicular(t);
    const Vec3 v = cross(t, u);

    std::vector<double> h(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
        h[i] = dot(mesh.vertices[i] - point, t);
    auto above = [&](int i) { return h[i] >= 0.0; };

    // each crossed triangle links its two crossed edges
    auto edge_key = [](int a, int b) {
        return std::pair<int, int>{std::min(a, b), std::max(a, b)};
    };
    std::map<std::pair<int, int>, Vec3> cut_point;
    std::map<std::pair<int, int>, std::vector<std::pair<int, int>>> links;
    for (const auto& tri : mesh.triangles) {
        std::vector<std::pair<int, int>> crossed;
        for (int e = 0; e < 3; ++e) {
            int a = tri[e], b = tri[(e + 1) % 3];
            if (above(a) == above(b)) continue;
            auto key = edge_key(a, b);
            crossed.push_back(key);
            if (!cut_point.count(key)) {
                double w = h[a] / (h[a] - h[b]);
                cut_point[key] = mesh.vertices[a] + w * (mesh.vertices[b] - mesh.vertices[a]);
            }
        }
        if (crossed.empty()) continue;
        if (crossed.size() != 2)
            throw value_error("cross_section: degenerate plane-triangle crossing");
        links[crossed[0]].push_back(crossed[1]);
        links[crossed[1]].push_back(crossed[0]);
    }
    if (cut_point.empty())
        throw value_error("cross_section: plane does not intersect the mesh");

    // chain edge-to-edge into loops
    std::map<std::pair<int, int>, bool> used;
    std::vector<std::vector<Vec3>> loops;
    for (const auto& [start, pt] : cut_point) {
        if (used[start]) continue;
        std::vector<Vec3> loop;
        auto cur = start;
        auto prev = start;
        while (true) {
            used[cur] = true;
            loop.push_back(cut_point[cur]);
            const auto& nbr = links[cur];
            if (nbr.size() != 2)
                throw value_error("cross_section: open intersection chain "
                                  "(mesh is not watertight)");
            const bool first = cur == start && loop.size() == 1;
            auto next = first ? nbr[1] : (nbr[0] == prev ? nbr[1] : nbr[0]);
            prev = cur;
            cur = next;
            if (cur == start) break;
        }
        loops.push_back(std::move(loop));
    }

    // project into the plane basis and pick the loop around the origin
    CrossSection best;
    double best_dist = std::numeric_limits<double>::infinity();
    bool found_enclosing = false;
    for (auto& loop : loops) {
        if (loop.size() < 3) continue;
        CrossSection cs;
        cs.loop_mm = loop;
        cs.loop_2d.reserve(loop.size());
        for (const auto& p : loop)
            cs.loop_2d.push_back({dot(p - point, u), dot(p - point, v)});
        const bool enclosing = detail::point_in_polygon(cs.loop_2d, 0.0, 0.0);
        double d = std::numeric_limits<double>::infinity();
        if (!enclosing)
            for (std::size_t i = 0, j = cs.loop_2d.size() - 1; i < cs.loop_2d.size(); j = i++)
                d = std::min(d, detail::point_segment_distance_2d(0.0, 0.0, cs.loop_2d[j],
                                                                  cs.loop_2d[i]));
        if ((enclosing && !found_enclosing) || (enclosing == found_enclosing && d < best_dist) ||
            (enclosing && found_enclosing &&
             detail::shoelace_area(cs.loop_2d) < best.area_mm2)) {
            // smaller enclosing loop wins: innermost boundary around the point
            cs.area_mm2 = detail::shoelace_area(cs.loop_2d);
            best = std::move(cs);
            best_dist = d;
            found_enclosing = found_enclosing || enclosing;
        }
    }
    if (best.loop_2d.empty())
        throw value_error("cross_section: no usable intersection loop");
    return best;
}

struct RadiusMeasures {
    double r_inscribed_mm = 0.0;
    double r_equiv_area_mm = 0.0;
    double d_max_chord_mm = 0.0;
};

/// Radii of a cross-section about the centerline point (the plane origin):
/// nearest wall distance, equal-area circle radius, and the longest chord
/// between contour vertices.
inline RadiusMeasures radius_measures(const CrossSection& cs) {
    const auto& poly = cs.loop_2d;
    if (poly.size() < 3) throw value_error("radius_measures: degenerate contour");
    if (!detail::point_in_polygon(poly, 0.0, 0.0))
        throw value_error("radius_measures: center lies outside the contour");
    RadiusMeasures r;
    r.r_inscribed_mm = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++)
        r.r_inscribed_mm =
            std::min(r.r_inscribed_mm, detail::point_segment_distance_2d(0, 0, poly[j], poly[i]));
    r.r_equiv_area_mm = std::sqrt(cs.area_mm2 / 3.14159265358979323846);
    for (std::size_t i = 0; i < poly.size(); ++i)
        for (std::size_t j = i + 1; j < poly.size(); ++j)
            r.d_max_chord_mm = std::max(
                r.d_max_chord_mm, std::hypot(poly[i][0] - poly[j][0], poly[i][1] - poly[j][1]));
    return r;
}

}  // namespace vmorph
