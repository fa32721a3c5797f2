#pragma once

#include "vmorph/mesh/marching_cubes.hpp"
#include "vmorph/mesh/smoothing.hpp"
#include "vmorph/volume.hpp"

namespace vmorph {

/// Stacks per-slice binary masks into a volume. Slices must share one shape
/// and in-plane spacing; z positions must be strictly increasing and uniform
/// (they become the volume's z spacing and origin).
inline Volume3D stack_slices(const std::vector<Slice2D>& masks,
                             const std::vector<double>& z_positions_mm) {
    if (masks.empty()) throw value_error("stack_slices: no slices");
    if (masks.size() != z_positions_mm.size())
        throw value_error("stack_slices: slice and z position counts differ");
    const Slice2D& first = masks.front();
    for (const auto& s : masks)
        if (s.height != first.height || s.width != first.width || s.sx != first.sx ||
            s.sy != first.sy)
            throw value_error("stack_slices: slices disagree in shape or spacing");

    double sz = 1.0;
    if (masks.size() > 1) {
        sz = z_positions_mm[1] - z_positions_mm[0];
        for (std::size_t k = 1; k < z_positions_mm.size(); ++k) {
            double step = z_positions_mm[k] - z_positions_mm[k - 1];
            if (step <= 0.0)
                throw value_error("stack_slices: z positions must be strictly increasing");
            if (std::abs(step - sz) > 1e-9 * std::max(1.0, std::abs(sz)))
                throw value_error("stack_slices: non-uniform z spacing");
        }
    }

    Volume3D vol(first.width, first.height, static_cast<int>(masks.size()), first.sx,
                 first.sy, sz, VolumeKind::binary_mask);
    vol.origin = {0.0, 0.0, z_positions_mm.front()};
    for (std::size_t k = 0; k < masks.size(); ++k)
        std::copy(masks[k].data.begin(), masks[k].data.end(),
                  vol.data.begin() + k * masks[k].size());
    vol.validate();
    return vol;
}

/// Mask-to-mesh settings. Defaults follow the reconstruction recipe used
/// throughout: blur the binary mask one voxel, extract at 0.5, keep the main
/// component, then Laplacian and Taubin passes.
struct ReconOptions {
    double gaussian_sigma = 1.0;
    double iso = 0.5;
    bool keep_largest = true;
    int laplacian_iterations = 10;
    double laplacian_lambda = 0.5;
    int taubin_iterations = 10;
    double taubin_lambda = 0.5;
    double taubin_mu = -0.53;
};

inline TriMesh reconstruct_mesh(const Volume3D& mask, const ReconOptions& opts = {}) {
    Volume3D field = gaussian_smooth(mask, opts.gaussian_sigma);
    TriMesh mesh = marching_cubes(field, opts.iso);
    if (mesh.triangles.empty()) return mesh;
    if (opts.keep_largest) mesh = largest_component(mesh);
    if (opts.laplacian_iterations > 0)
        mesh = laplacian_smooth(std::move(mesh), opts.laplacian_iterations,
                                opts.laplacian_lambda);
    if (opts.taubin_iterations > 0)
        mesh = taubin_smooth(std::move(mesh), opts.taubin_iterations, opts.taubin_lambda,
                             opts.taubin_mu);
    return mesh;
}

}  // namespace vmorph
