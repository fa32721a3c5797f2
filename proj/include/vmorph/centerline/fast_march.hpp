#pragma once

#include <queue>

#include "vmorph/centerline/edt.hpp"
#include "vmorph/mesh/trimesh.hpp"  // Vec3 helpers

namespace vmorph {

struct FmmOptions {
    double eps_d_mm = 0.1;    // speed regularizer so F > 0 at the wall
    double exponent = 1.0;    // F = d^exponent + eps_d
    double step_factor = 0.25;  // descent step, fraction of min spacing
    bool uniform_speed = false;  // F = 1 everywhere (analytic test hook)
};

struct VoxelIndex {
    int x = 0, y = 0, z = 0;
};

struct FmmResult {
    Volume3D arrival;            // T in the marched component, +inf elsewhere
    std::vector<Vec3> path_mm;   // inlet -> outlet, ~uniform 1 mm arc spacing
    double outlet_time = 0.0;
};

namespace detail {

inline double fmm_speed(double d, const FmmOptions& opt) {
    if (opt.uniform_speed) return 1.0;
    return std::pow(d, opt.exponent) + opt.eps_d_mm;
}

// First-order upwind solution of sum_a ((T - t_a)/h_a)^2 = 1/F^2 over the
// axes with an accepted neighbor, dropping the largest t_a until the root
// dominates every contributor.
inline double eikonal_update(std::vector<std::pair<double, double>>& cand, double f) {
    std::sort(cand.begin(), cand.end());
    const double rhs = 1.0 / (f * f);
    for (int m = static_cast<int>(cand.size()); m >= 1; --m) {
        double a = 0.0, b = 0.0, c = -rhs;
        for (int i = 0; i < m; ++i) {
            const double inv_h2 = 1.0 / (cand[i].second * cand[i].second);
            a += inv_h2;
            b -= 2.0 * cand[i].first * inv_h2;
            c += cand[i].first * cand[i].first * inv_h2;
        }
        const double disc = b * b - 4.0 * a * c;
        if (disc >= 0.0) {
            const double t = (-b + std::sqrt(disc)) / (2.0 * a);
            if (t >= cand[m - 1].first) return t;
        }
    }
    // single-neighbor fallback cannot fail: ((T - t)/h)^2 = rhs
    return cand[0].first + cand[0].second / f;
}

inline Vec3 voxel_center_mm(const Volume3D& v, const VoxelIndex& i) {
    return {(i.x + 0.5) * v.sx, (i.y + 0.5) * v.sy, (i.z + 0.5) * v.sz};
}

// Trilinear interpolation over voxel centers in mm space, clamped at borders.
inline double interp_mm(const Volume3D& v, const Vec3& p) {
    auto axis = [](double mm, double s, int n) {
        double u = mm / s - 0.5;
        if (u < 0) u = 0;
        if (u > n - 1) u = n - 1;
        int i0 = static_cast<int>(u);
        if (i0 > n - 2) i0 = n < 2 ? 0 : n - 2;
        return std::pair<int, double>{i0, u - i0};
    };
    auto [x0, fx] = axis(p[0], v.sx, v.nx);
    auto [y0, fy] = axis(p[1], v.sy, v.ny);
    auto [z0, fz] = axis(p[2], v.sz, v.nz);
    auto at = [&](int x, int y, int z) {
        return v.data[(static_cast<std::size_t>(z) * v.ny + y) * v.nx + x];
    };
    int x1 = v.nx > 1 ? x0 + 1 : x0, y1 = v.ny > 1 ? y0 + 1 : y0, z1 = v.nz > 1 ? z0 + 1 : z0;
    double c00 = at(x0, y0, z0) * (1 - fx) + at(x1, y0, z0) * fx;
    double c10 = at(x0, y1, z0) * (1 - fx) + at(x1, y1, z0) * fx;
    double c01 = at(x0, y0, z1) * (1 - fx) + at(x1, y0, z1) * fx;
    double c11 = at(x0, y1, z1) * (1 - fx) + at(x1, y1, z1) * fx;
    return (c00 * (1 - fy) + c10 * fy) * (1 - fz) + (c01 * (1 - fy) + c11 * fy) * fz;
}

inline std::vector<Vec3> resample_polyline(const std::vector<Vec3>& pts, double spacing_mm) {
    if (pts.size() < 2) return pts;
    std::vector<double> s(pts.size(), 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i)
        s[i] = s[i - 1] + norm(pts[i] - pts[i - 1]);
    const double total = s.back();
    if (total <= spacing_mm) return {pts.front(), pts.back()};
    const int n = static_cast<int>(std::round(total / spacing_mm));
    std::vector<Vec3> out;
    out.reserve(n + 1);
    std::size_t seg = 0;
    for (int k = 0; k <= n; ++k) {
        double target = total * k / n;
        while (seg + 2 < s.size() && s[seg + 1] < target) ++seg;
        double span = s[seg + 1] - s[seg];
        double u = span > 0 ? (target - s[seg]) / span : 0.0;
        out.push_back(pts[seg] + u * (pts[seg + 1] - pts[seg]));
    }
    return out;
}

}  // namespace detail

/// Default seed choice: the deepest voxel (max d) of the first and last axial
/// slices that contain mask, matching how vessel ends show up in axial stacks.
inline std::pair<VoxelIndex, VoxelIndex> select_endpoints(const DistanceField& dist) {
    auto deepest_in_slice = [&](int z) -> VoxelIndex {
        VoxelIndex best{-1, -1, z};
        double best_d = 0.0;
        for (int y = 0; y < dist.ny; ++y)
            for (int x = 0; x < dist.nx; ++x) {
                double d = dist.data[(static_cast<std::size_t>(z) * dist.ny + y) * dist.nx + x];
                if (d > best_d) {
                    best_d = d;
                    best = {x, y, z};
                }
            }
        return best;
    };
    for (int z0 = 0; z0 < dist.nz; ++z0) {
        VoxelIndex inlet = deepest_in_slice(z0);
        if (inlet.x < 0) continue;
        for (int z1 = dist.nz - 1; z1 >= z0; --z1) {
            VoxelIndex outlet = deepest_in_slice(z1);
            if (outlet.x >= 0)
                return {inlet, outlet};
        }
    }
    throw value_error("select_endpoints: empty mask");
}

/// Fast-marching solution of |grad T| = 1/F with F = d^p + eps on the interior
/// (d > 0), then a sub-voxel steepest-descent backtrack from outlet to inlet.
/// Traversal cost falls with distance to the wall, so the cheapest path runs
/// along the medial axis.
inline FmmResult fast_march(const DistanceField& dist, VoxelIndex inlet, VoxelIndex outlet,
                            const FmmOptions& opt = {}) {
    const int nx = dist.nx, ny = dist.ny, nz = dist.nz;
    const double inf = std::numeric_limits<double>::infinity();
    auto flat = [&](int x, int y, int z) {
        return (static_cast<std::size_t>(z) * ny + y) * nx + x;
    };
    auto inside = [&](int x, int y, int z) {
        return x >= 0 && y >= 0 && z >= 0 && x < nx && y < ny && z < nz &&
               dist.data[flat(x, y, z)] > 0.0;
    };
    for (const VoxelIndex* e : {&inlet, &outlet})
        if (!inside(e->x, e->y, e->z))
            throw value_error("fast_march: endpoint is not an interior voxel");

    FmmResult res;
    res.arrival = dist;
    res.arrival.kind = VolumeKind::intensity;
    std::fill(res.arrival.data.begin(), res.arrival.data.end(), inf);
    std::vector<std::uint8_t> accepted(dist.data.size(), 0);

    using Entry = std::pair<double, std::size_t>;  // (T, flat index): index breaks ties
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
    auto& T = res.arrival.data;
    T[flat(inlet.x, inlet.y, inlet.z)] = 0.0;
    heap.push({0.0, flat(inlet.x, inlet.y, inlet.z)});

    // First-order upwinding is poor within a few cells of a point source, so
    // seed straight-ray arrival times inside the ball of radius d(inlet),
    // which the distance transform guarantees is wall-free. The seed value is
    // a composite-trapezoid line integral of 1/F over the interpolated
    // distance field; updates may still lower it if a curved route is cheaper.
    {
        const Vec3 s_mm = detail::voxel_center_mm(dist, inlet);
        const double r_seed = dist.data[flat(inlet.x, inlet.y, inlet.z)];
        const double min_h = std::min({dist.sx, dist.sy, dist.sz});
        auto ray_time = [&](const Vec3& q_mm, double r) {
            const int pieces = std::max(1, static_cast<int>(std::ceil(r / (0.5 * min_h))));
            double t = 0.0;
            double prev = 1.0 / detail::fmm_speed(detail::interp_mm(dist, s_mm), opt);
            for (int k = 1; k <= pieces; ++k) {
                const Vec3 m = s_mm + (static_cast<double>(k) / pieces) * (q_mm - s_mm);
                const double cur = 1.0 / detail::fmm_speed(detail::interp_mm(dist, m), opt);
                t += 0.5 * (prev + cur) * (r / pieces);
                prev = cur;
            }
            return t;
        };
        const int x0 = std::max(0, static_cast<int>(std::ceil(inlet.x - r_seed / dist.sx)));
        const int x1 = std::min(nx - 1, static_cast<int>(std::floor(inlet.x + r_seed / dist.sx)));
        const int y0 = std::max(0, static_cast<int>(std::ceil(inlet.y - r_seed / dist.sy)));
        const int y1 = std::min(ny - 1, static_cast<int>(std::floor(inlet.y + r_seed / dist.sy)));
        const int z0 = std::max(0, static_cast<int>(std::ceil(inlet.z - r_seed / dist.sz)));
        const int z1 = std::min(nz - 1, static_cast<int>(std::floor(inlet.z + r_seed / dist.sz)));
        for (int z = z0; z <= z1; ++z)
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) {
                    const std::size_t idx = flat(x, y, z);
                    if (dist.data[idx] <= 0.0 || (x == inlet.x && y == inlet.y && z == inlet.z))
                        continue;
                    const Vec3 q_mm = detail::voxel_center_mm(dist, {x, y, z});
                    const double r = norm(q_mm - s_mm);
                    if (r >= r_seed) continue;
                    const double t = ray_time(q_mm, r);
                    if (t < T[idx]) {
                        T[idx] = t;
                        heap.push({t, idx});
                    }
                }
    }

    const int dx[6] = {1, -1, 0, 0, 0, 0};
    const int dy[6] = {0, 0, 1, -1, 0, 0};
    const int dz[6] = {0, 0, 0, 0, 1, -1};
    const double hs[3] = {dist.sx, dist.sy, dist.sz};
    std::vector<std::pair<double, double>> cand;
    while (!heap.empty()) {
        auto [t, idx] = heap.top();
        heap.pop();
        if (accepted[idx]) continue;  // lazy deletion
        accepted[idx] = 1;
        const int z = static_cast<int>(idx / (static_cast<std::size_t>(nx) * ny));
        const int y = static_cast<int>(idx / nx % ny);
        const int x = static_cast<int>(idx % nx);
        for (int n6 = 0; n6 < 6; ++n6) {
            const int px = x + dx[n6], py = y + dy[n6], pz = z + dz[n6];
            if (!inside(px, py, pz)) continue;
            const std::size_t pidx = flat(px, py, pz);
            if (accepted[pidx]) continue;
            cand.clear();
            for (int a = 0; a < 3; ++a) {
                double best_t = inf;
                for (int dir : {-1, 1}) {
                    int qx = px + (a == 0 ? dir : 0), qy = py + (a == 1 ? dir : 0),
                        qz = pz + (a == 2 ? dir : 0);
                    if (!inside(qx, qy, qz) || !accepted[flat(qx, qy, qz)]) continue;
                    best_t = std::min(best_t, T[flat(qx, qy, qz)]);
                }
                if (best_t < inf) cand.push_back({best_t, hs[a]});
            }
            if (cand.empty()) continue;
            double tn = detail::eikonal_update(cand, detail::fmm_speed(dist.data[pidx], opt));
            if (tn < T[pidx]) {
                T[pidx] = tn;
                heap.push({tn, pidx});
            }
        }
    }

    const std::size_t outlet_idx = flat(outlet.x, outlet.y, outlet.z);
    if (!accepted[outlet_idx])
        throw value_error("fast_march: outlet not reachable from inlet inside the mask");
    res.outlet_time = T[outlet_idx];

    // descend T from the outlet; finite-difference gradient on the trilinear
    // interpolant, strict decrease enforced with an accepted-neighbor fallback
    const double min_h = std::min({dist.sx, dist.sy, dist.sz});
    const double step = opt.step_factor * min_h;
    const Vec3 inlet_mm = detail::voxel_center_mm(dist, inlet);
    Vec3 p = detail::voxel_center_mm(dist, outlet);
    std::vector<Vec3> back = {p};
    double t_here = detail::interp_mm(res.arrival, p);
    const std::size_t step_cap =
        64 + static_cast<std::size_t>(40.0 * (nx * dist.sx + ny * dist.sy + nz * dist.sz) / step);
    auto voxel_dist = [&](const Vec3& a, const Vec3& b) {
        return std::hypot((a[0] - b[0]) / dist.sx, (a[1] - b[1]) / dist.sy,
                          (a[2] - b[2]) / dist.sz);
    };
    while (voxel_dist(p, inlet_mm) > 1.0) {
        if (back.size() > step_cap)
            throw value_error("fast_march: descent failed to reach the inlet");
        Vec3 g;
        for (int a = 0; a < 3; ++a) {
            Vec3 lo = p, hi = p;
            const double h = 0.5 * hs[a];
            lo[a] -= h;
            hi[a] += h;
            g[a] = (detail::interp_mm(res.arrival, hi) - detail::interp_mm(res.arrival, lo)) /
                   (2.0 * h);
        }
        const double gn = norm(g);
        Vec3 next = p;
        double t_next = inf;
        if (std::isfinite(gn) && gn > 0.0) {
            next = p - (step / gn) * g;
            t_next = detail::interp_mm(res.arrival, next);
        }
        if (!(t_next < t_here)) {
            // slide to the best accepted 26-neighbor voxel center
            int cx = static_cast<int>(p[0] / dist.sx), cy = static_cast<int>(p[1] / dist.sy),
                cz = static_cast<int>(p[2] / dist.sz);
            double best = t_here;
            bool found = false;
            for (int ddz = -1; ddz <= 1; ++ddz)
                for (int ddy = -1; ddy <= 1; ++ddy)
                    for (int ddx = -1; ddx <= 1; ++ddx) {
                        int qx = cx + ddx, qy = cy + ddy, qz = cz + ddz;
                        if (!inside(qx, qy, qz) || !accepted[flat(qx, qy, qz)]) continue;
                        double tq = T[flat(qx, qy, qz)];
                        if (tq < best) {
                            best = tq;
                            next = detail::voxel_center_mm(dist, {qx, qy, qz});
                            found = true;
                        }
                    }
            if (!found)
                throw value_error("fast_march: descent stalled away from the inlet");
            t_next = best;
        }
        p = next;
        t_here = t_next;
        back.push_back(p);
    }
    back.push_back(inlet_mm);
    std::reverse(back.begin(), back.end());
    res.path_mm = detail::resample_polyline(back, 1.0);
    return res;
}

}  // namespace vmorph
