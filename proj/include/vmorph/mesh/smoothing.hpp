#pragma once

#include "vmorph/mesh/trimesh.hpp"
#include "vmorph/volume.hpp"

namespace vmorph {

namespace detail {

// scipy-style 'reflect': ... c b a | a b c d | d c b ...
inline int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
}

inline std::vector<double> gaussian_kernel(double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> w(2 * radius + 1);
    double sum = 0.0;
    for (int t = -radius; t <= radius; ++t)
        sum += w[t + radius] = std::exp(-0.5 * t * t / (sigma * sigma));
    for (double& v : w) v /= sum;
    return w;
}

}  // namespace detail

/// Separable Gaussian blur with reflected boundaries. sigma 0 returns the
/// input untouched; the kernel is normalized so constants are fixed points and
/// the voxel sum is preserved.
inline Volume3D gaussian_smooth(const Volume3D& vol, double sigma_voxels) {
    if (sigma_voxels < 0.0)
        throw value_error("gaussian_smooth: sigma must be >= 0");
    if (sigma_voxels == 0.0) return vol;
    const auto w = detail::gaussian_kernel(sigma_voxels);
    const int radius = (static_cast<int>(w.size()) - 1) / 2;

    Volume3D out = vol;
    std::vector<double> line;
    auto blur_lines = [&](int n, std::size_t count, std::size_t stride,
                          auto base_of) {
        line.resize(n);
        for (std::size_t l = 0; l < count; ++l) {
            const std::size_t base = base_of(l);
            for (int i = 0; i < n; ++i) line[i] = out.data[base + i * stride];
            for (int i = 0; i < n; ++i) {
                double acc = 0.0;
                for (int t = -radius; t <= radius; ++t)
                    acc += w[t + radius] * line[detail::reflect_index(i + t, n)];
                out.data[base + i * stride] = acc;
            }
        }
    };

    const std::size_t nx = vol.nx, ny = vol.ny, nz = vol.nz;
    blur_lines(vol.nx, ny * nz, 1, [&](std::size_t l) { return l * nx; });
    blur_lines(vol.ny, nx * nz, nx, [&](std::size_t l) {
        return (l / nx) * nx * ny + (l % nx);
    });
    blur_lines(vol.nz, nx * ny, nx * ny, [&](std::size_t l) { return l; });
    out.kind = VolumeKind::intensity;  // blurring breaks mask/label invariants
    return out;
}

namespace detail {

inline std::vector<std::vector<int>> vertex_neighbors(const TriMesh& mesh) {
    std::map<std::pair<int, int>, int> edge_use;
    for (const auto& t : mesh.triangles)
        for (int e = 0; e < 3; ++e) {
            int a = t[e], b = t[(e + 1) % 3];
            if (++edge_use[{std::min(a, b), std::max(a, b)}] > 2)
                throw value_error("mesh smoothing: edge shared by more than two "
                                  "triangles (non-manifold)");
        }
    std::vector<std::vector<int>> nbr(mesh.vertices.size());
    for (const auto& [edge, count] : edge_use) {
        nbr[edge.first].push_back(edge.second);
        nbr[edge.second].push_back(edge.first);
    }
    return nbr;
}

inline void jacobi_step(TriMesh& mesh, const std::vector<std::vector<int>>& nbr,
                        double lambda) {
    std::vector<Vec3> next = mesh.vertices;
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        if (nbr[v].empty()) continue;
        Vec3 mean = {0, 0, 0};
        for (int u : nbr[v]) mean = mean + mesh.vertices[u];
        mean = (1.0 / nbr[v].size()) * mean;
        next[v] = mesh.vertices[v] + lambda * (mean - mesh.vertices[v]);
    }
    mesh.vertices = std::move(next);
}

}  // namespace detail

/// Uniform-weight Laplacian smoothing, v += lambda * (neighbor mean - v),
/// Jacobi updates. Shrinks closed surfaces; connectivity is untouched.
inline TriMesh laplacian_smooth(TriMesh mesh, int iterations, double lambda = 0.5) {
    if (iterations < 0) throw config_error("laplacian_smooth: iterations must be >= 0");
    if (iterations == 0) return mesh;
    const auto nbr = detail::vertex_neighbors(mesh);
    for (int it = 0; it < iterations; ++it) detail::jacobi_step(mesh, nbr, lambda);
    return mesh;
}

/// Taubin's shrink/inflate pairs: a lambda step followed by a mu step per
/// iteration. Requires lambda > 0 > mu and |mu| > lambda, which keeps the
/// enclosed volume nearly constant where plain Laplacian smoothing collapses.
inline TriMesh taubin_smooth(TriMesh mesh, int iterations, double lambda = 0.5,
                             double mu = -0.53) {
    if (iterations < 0) throw config_error("taubin_smooth: iterations must be >= 0");
    if (!(lambda > 0.0) || !(mu < 0.0) || !(std::abs(mu) > lambda))
        throw config_error("taubin_smooth: need lambda > 0 > mu and |mu| > lambda");
    if (iterations == 0) return mesh;
    const auto nbr = detail::vertex_neighbors(mesh);
    for (int it = 0; it < iterations; ++it) {
        detail::jacobi_step(mesh, nbr, lambda);
        detail::jacobi_step(mesh, nbr, mu);
    }
    return mesh;
}

}  // namespace vmorph
