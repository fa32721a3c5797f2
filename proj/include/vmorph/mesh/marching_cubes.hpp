#pragma once

#include <unordered_map>

#include "vmorph/mesh/mc_tables.hpp"
#include "vmorph/mesh/trimesh.hpp"
#include "vmorph/volume.hpp"

namespace vmorph {

namespace detail {

// Lattice nodes sit on voxel centers plus a one-node zero ring on every side,
// so masks that touch the grid boundary still close. Node (i,j,k) covers voxel
// (i-1, j-1, k-1); the ring reads as 0.
struct McGrid {
    const Volume3D* vol;
    int nx, ny, nz;  // node counts

    explicit McGrid(const Volume3D& v)
        : vol(&v), nx(v.nx + 2), ny(v.ny + 2), nz(v.nz + 2) {}

    double value(int i, int j, int k) const {
        int x = i - 1, y = j - 1, z = k - 1;
        if (x < 0 || y < 0 || z < 0 || x >= vol->nx || y >= vol->ny || z >= vol->nz) return 0.0;
        return vol->data[(static_cast<std::size_t>(z) * vol->ny + y) * vol->nx + x];
    }
    Vec3 position(int i, int j, int k) const {
        return {(i - 0.5) * vol->sx, (j - 0.5) * vol->sy, (k - 0.5) * vol->sz};
    }
    // Every lattice edge is parallel to one axis; key it by its low node.
    std::uint64_t edge_key(int i, int j, int k, int axis) const {
        return (static_cast<std::uint64_t>((static_cast<std::uint64_t>(k) * ny + j) * nx + i)) * 3 + axis;
    }
};

}  // namespace detail

/// Extracts the iso-level surface of `vol` as a triangle mesh. Corners with
/// value >= iso count as inside; the volume is treated as surrounded by zeros,
/// so iso must be positive. Vertices on shared cell edges are welded (keyed by
/// lattice edge, not discovery order), which makes closed surfaces watertight.
/// Triangles are wound so normals point out of the >= iso region.
inline TriMesh marching_cubes(const Volume3D& vol, double iso = 0.5) {
    if (!(iso > 0.0)) throw value_error("marching_cubes: iso level must be > 0");
    detail::McGrid grid(vol);
    TriMesh mesh;
    std::unordered_map<std::uint64_t, int> weld;

    double corner[8];
    int edge_vertex[12];
    for (int k = 0; k + 1 < grid.nz; ++k)
        for (int j = 0; j + 1 < grid.ny; ++j)
            for (int i = 0; i + 1 < grid.nx; ++i) {
                int cube = 0;
                for (int c = 0; c < 8; ++c) {
                    const auto& o = mc::kCornerOffset[c];
                    corner[c] = grid.value(i + o[0], j + o[1], k + o[2]);
                    if (corner[c] < iso) cube |= 1 << c;
                }
                const std::uint16_t mask = mc::kEdgeMask[cube];
                if (mask == 0) continue;

                for (int e = 0; e < 12; ++e) {
                    if (!(mask & (1 << e))) continue;
                    const auto [c0, c1] = mc::kEdgeCorners[e];
                    const auto& o0 = mc::kCornerOffset[c0];
                    const auto& o1 = mc::kCornerOffset[c1];
                    int axis = (o0[0] != o1[0]) ? 0 : (o0[1] != o1[1]) ? 1 : 2;
                    int li = i + std::min(o0[0], o1[0]);
                    int lj = j + std::min(o0[1], o1[1]);
                    int lk = k + std::min(o0[2], o1[2]);
                    auto [it, fresh] = weld.try_emplace(grid.edge_key(li, lj, lk, axis),
                                                        static_cast<int>(mesh.vertices.size()));
                    if (fresh) {
                        double u = (iso - corner[c0]) / (corner[c1] - corner[c0]);
                        Vec3 p0 = grid.position(i + o0[0], j + o0[1], k + o0[2]);
                        Vec3 p1 = grid.position(i + o1[0], j + o1[1], k + o1[2]);
                        mesh.vertices.push_back(p0 + u * (p1 - p0));
                    }
                    edge_vertex[e] = it->second;
                }
                // table winding faces the inside; swap to point normals outward
                for (const std::int8_t* t = mc::kTriangles[cube].data(); *t != -1; t += 3) {
                    int a = edge_vertex[t[0]], b = edge_vertex[t[1]], c = edge_vertex[t[2]];
                    if (a == b || b == c || a == c) continue;
                    if (triangle_area(mesh.vertices[a], mesh.vertices[c], mesh.vertices[b]) < 1e-12)
                        continue;
                    mesh.triangles.push_back({a, c, b});
                }
            }
    return mesh;
}

}  // namespace vmorph
