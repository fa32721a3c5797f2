#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "vmorph/error.hpp"

namespace vmorph {

using Vec3 = std::array<double, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

/// Triangle surface in mm coordinates. Orientation convention: counterclockwise
/// seen from outside, so signed volume of a closed mesh comes out positive.
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;

    void validate() const {
        const int n = static_cast<int>(vertices.size());
        for (const auto& t : triangles) {
            for (int i : t)
                if (i < 0 || i >= n)
                    throw value_error("TriMesh: triangle index " + std::to_string(i) +
                                      " outside [0, " + std::to_string(n) + ")");
            if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
                throw value_error("TriMesh: triangle with repeated vertex");
        }
    }
};

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
    return 0.5 * norm(cross(b - a, c - a));
}

/// True iff every undirected edge is used by exactly two triangles, once in
/// each direction (closed and consistently oriented).
inline bool is_watertight(const TriMesh& mesh) {
    if (mesh.triangles.empty()) return false;
    std::map<std::pair<int, int>, int> seen;  // directed edge -> count
    for (const auto& t : mesh.triangles)
        for (int e = 0; e < 3; ++e) {
            int a = t[e], b = t[(e + 1) % 3];
            if (++seen[{a, b}] > 1) return false;
        }
    for (const auto& [edge, count] : seen) {
        auto rev = seen.find({edge.second, edge.first});
        if (rev == seen.end()) return false;
    }
    return true;
}

struct MeshMeasures {
    double area_mm2 = 0.0;
    double volume_mm3 = 0.0;
};

/// Total surface area and enclosed volume (divergence theorem over signed
/// tetrahedra to the origin; translation invariant for closed surfaces).
inline MeshMeasures mesh_measures(const TriMesh& mesh) {
    if (!is_watertight(mesh))
        throw value_error("mesh_measures: mesh is not watertight");
    MeshMeasures m;
    double signed_vol = 0.0;
    for (const auto& t : mesh.triangles) {
        const Vec3& a = mesh.vertices[t[0]];
        const Vec3& b = mesh.vertices[t[1]];
        const Vec3& c = mesh.vertices[t[2]];
        m.area_mm2 += triangle_area(a, b, c);
        signed_vol += dot(a, cross(b, c)) / 6.0;
    }
    m.volume_mm3 = std::abs(signed_vol);
    return m;
}

/// Splits by shared-vertex connectivity and keeps the component with the most
/// triangles. Unreferenced vertices are dropped. Component triangle counts
/// (descending) are reported through `sizes` when given.
inline TriMesh largest_component(const TriMesh& mesh, std::vector<int>* sizes = nullptr) {
    const int nv = static_cast<int>(mesh.vertices.size());
    std::vector<int> parent(nv);
    for (int i = 0; i < nv; ++i) parent[i] = i;
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& t : mesh.triangles) {
        int a = find(t[0]);
        parent[find(t[1])] = a;
        parent[find(t[2])] = a;
    }
    std::map<int, int> tri_count;
    for (const auto& t : mesh.triangles) ++tri_count[find(t[0])];
    if (sizes) {
        sizes->clear();
        for (auto& [root, n] : tri_count) sizes->push_back(n);
        std::sort(sizes->begin(), sizes->end(), std::greater<>());
    }
    if (tri_count.empty()) return {};
    int best_root = tri_count.begin()->first;
    for (auto& [root, n] : tri_count)
        if (n > tri_count[best_root]) best_root = root;

    TriMesh out;
    std::vector<int> remap(nv, -1);
    for (const auto& t : mesh.triangles) {
        if (find(t[0]) != best_root) continue;
        std::array<int, 3> nt;
        for (int e = 0; e < 3; ++e) {
            if (remap[t[e]] < 0) {
                remap[t[e]] = static_cast<int>(out.vertices.size());
                out.vertices.push_back(mesh.vertices[t[e]]);
            }
            nt[e] = remap[t[e]];
        }
        out.triangles.push_back(nt);
    }
    return out;
}

inline TriMesh translated(TriMesh mesh, const Vec3& offset) {
    for (auto& v : mesh.vertices) v = v + offset;
    return mesh;
}

}  // namespace vmorph
