#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "vmorph/anatomy.hpp"
#include "vmorph/rng.hpp"
#include "vmorph/volume.hpp"

namespace vmorph {

struct Ellipsoid {
    std::array<double, 3> center_mm{};
    std::array<double, 3> semi_mm{};
    double intensity_hu = 60.0;
    double core_fraction = 0.0;      // radius fraction of a brighter interior
    double core_hu = 300.0;          // vertebra/contrast-bowel mimic
    std::string name = "organ";

    double normalized_r2(double x, double y, double z) const {
        double u = (x - center_mm[0]) / semi_mm[0];
        double v = (y - center_mm[1]) / semi_mm[1];
        double w = (z - center_mm[2]) / semi_mm[2];
        return u * u + v * v + w * w;
    }

    bool contains(double x, double y, double z) const { return normalized_r2(x, y, z) <= 1.0; }

    double intensity_at(double x, double y, double z) const {
        return normalized_r2(x, y, z) <= core_fraction * core_fraction ? core_hu : intensity_hu;
    }
};

/// Synthetic CTA-like scene: a tube with a Gaussian aneurysmal bulge running
/// the full z extent, organ-like ellipsoids around it. All lengths in mm.
struct PhantomSpec {
    int nx = 96, ny = 96, nz = 96;
    double sx = 1.0, sy = 1.0, sz = 1.0;

    double axis_amplitude_mm = 0.0;  // sinusoidal x deflection of the axis
    double axis_period_mm = 0.0;     // 0 = one full period over the z extent
    double axis_offset_x_mm = 0.0;   // base position relative to the volume center
    double axis_offset_y_mm = 0.0;

    double lumen_radius_mm = 10.0;    // r_l, inner (bright) radius
    double bulge_radius_mm = 25.0;    // r_b, peak outer-wall radius
    double bulge_center_z_mm = 48.0;  // z0
    double bulge_sigma_mm = 12.0;     // axial spread of the bulge

    double lumen_hu = 300.0;
    double thrombus_hu = 60.0;
    double background_hu = -50.0;
    double noise_sigma_hu = 15.0;

    std::vector<Ellipsoid> distractors;  // labeled organs, excluded from the loss
    std::vector<Ellipsoid> soft_tissue;  // unlabeled context, stays in the allowed region

    std::uint64_t seed = 1;

    double extent_x() const { return nx * sx; }
    double extent_y() const { return ny * sy; }
    double extent_z() const { return nz * sz; }

    // outer-wall radius profile
    double outer_radius(double z) const {
        double dz = z - bulge_center_z_mm;
        return lumen_radius_mm + (bulge_radius_mm - lumen_radius_mm) *
                                     std::exp(-dz * dz / (2.0 * bulge_sigma_mm * bulge_sigma_mm));
    }

    double outer_radius_dz(double z) const {
        double dz = z - bulge_center_z_mm;
        double s2 = bulge_sigma_mm * bulge_sigma_mm;
        return (bulge_radius_mm - lumen_radius_mm) * std::exp(-dz * dz / (2.0 * s2)) * (-dz / s2);
    }

    double axis_period() const { return axis_period_mm > 0.0 ? axis_period_mm : extent_z(); }

    std::array<double, 2> axis_at(double z) const {
        double cx = 0.5 * extent_x() + axis_offset_x_mm +
                    axis_amplitude_mm *
                        std::sin(2.0 * std::numbers::pi * z / axis_period());
        return {cx, 0.5 * extent_y() + axis_offset_y_mm};
    }

    std::array<double, 2> axis_dz(double z) const {
        double p = axis_period();
        double cxp = axis_amplitude_mm * (2.0 * std::numbers::pi / p) *
                     std::cos(2.0 * std::numbers::pi * z / p);
        return {cxp, 0.0};
    }

    void validate() const {
        if (nx < 8 || ny < 8 || nz < 8)
            throw config_error("PhantomSpec: dims must be at least 8 voxels per axis");
        if (sx <= 0 || sy <= 0 || sz <= 0) throw config_error("PhantomSpec: spacing must be > 0");
        if (!(lumen_radius_mm > 0)) throw config_error("PhantomSpec: lumen radius must be > 0");
        if (bulge_radius_mm < lumen_radius_mm)
            throw config_error("PhantomSpec: bulge radius must be >= lumen radius");
        if (!(bulge_sigma_mm > 0)) throw config_error("PhantomSpec: bulge sigma must be > 0");
        if (bulge_center_z_mm < 0 || bulge_center_z_mm > extent_z())
            throw config_error("PhantomSpec: bulge center lies outside the volume");
        if (noise_sigma_hu < 0) throw config_error("PhantomSpec: noise sigma must be >= 0");

        const int nsamp = 2048;
        for (int k = 0; k <= nsamp; ++k) {
            double z = extent_z() * k / nsamp;
            double r = outer_radius(z);
            auto c = axis_at(z);
            if (c[0] - r < 0 || c[0] + r > extent_x() || c[1] - r < 0 || c[1] + r > extent_y())
                throw config_error("PhantomSpec: outer wall leaves the volume at z=" +
                                   std::to_string(z));
        }
        auto check_clearance = [&](const Ellipsoid& e, const char* what) {
            if (e.semi_mm[0] <= 0 || e.semi_mm[1] <= 0 || e.semi_mm[2] <= 0)
                throw config_error(std::string("PhantomSpec: ") + what +
                                   " ellipsoid semi-axes must be > 0");
            double in_plane = std::max(e.semi_mm[0], e.semi_mm[1]);
            for (int k = 0; k <= nsamp; ++k) {
                double z = extent_z() * k / nsamp;
                double rel = (z - e.center_mm[2]) / e.semi_mm[2];
                if (std::abs(rel) > 1.0) continue;
                double cut = in_plane * std::sqrt(1.0 - rel * rel);
                auto c = axis_at(z);
                double dx = e.center_mm[0] - c[0], dy = e.center_mm[1] - c[1];
                if (std::hypot(dx, dy) <= outer_radius(z) + cut)
                    throw config_error(std::string("PhantomSpec: ") + what + " ellipsoid '" +
                                       e.name + "' touches the outer wall");
            }
        };
        for (const auto& e : distractors) check_clearance(e, "distractor");
        for (const auto& e : soft_tissue) check_clearance(e, "soft-tissue");
    }
};

/// Quadrature-exact geometry of the outer-wall region, used as the oracle for
/// mesh and morphometry measurements.
struct PhantomAnalytic {
    double max_outer_diameter_mm = 0.0;
    double volume_mm3 = 0.0;        // integral of pi r(z)^2 over the z extent
    double lateral_area_mm2 = 0.0;  // side wall
    double cap_area_mm2 = 0.0;      // two planar end disks
    double surface_area_mm2 = 0.0;  // lateral + caps
    double centerline_arc_mm = 0.0;
    double centerline_chord_mm = 0.0;
    double tortuosity = 1.0;
    std::vector<std::array<double, 4>> axis_samples;  // z, cx, cy, r at slice centers
};

namespace detail {

// composite Simpson on [0, L]
template <class F>
double simpson(F&& f, double L, int intervals) {
    if (intervals % 2) ++intervals;
    double h = L / intervals, acc = f(0.0) + f(L);
    for (int i = 1; i < intervals; ++i) acc += f(i * h) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

}  // namespace detail

inline PhantomAnalytic analyze_phantom(const PhantomSpec& spec) {
    spec.validate();
    PhantomAnalytic a;
    const double L = spec.extent_z();
    const int n = 10000;

    double rmax = 0.0;
    for (int k = 0; k <= n; ++k) rmax = std::max(rmax, spec.outer_radius(L * k / n));
    a.max_outer_diameter_mm = 2.0 * rmax;

    a.volume_mm3 = detail::simpson(
        [&](double z) {
            double r = spec.outer_radius(z);
            return std::numbers::pi * r * r;
        },
        L, n);

    if (spec.axis_amplitude_mm == 0.0) {
        a.lateral_area_mm2 = detail::simpson(
            [&](double z) {
                double r = spec.outer_radius(z), rp = spec.outer_radius_dz(z);
                return 2.0 * std::numbers::pi * r * std::sqrt(1.0 + rp * rp);
            },
            L, n);
    } else {
        // tube around a curved axis: integrate |X_z x X_theta| over theta and z
        const int ntheta = 512;
        std::vector<double> ct(ntheta), st(ntheta);
        for (int t = 0; t < ntheta; ++t) {
            double th = 2.0 * std::numbers::pi * t / ntheta;
            ct[t] = std::cos(th);
            st[t] = std::sin(th);
        }
        a.lateral_area_mm2 = detail::simpson(
            [&](double z) {
                double r = spec.outer_radius(z), rp = spec.outer_radius_dz(z);
                auto cp = spec.axis_dz(z);
                double ring = 0.0;
                for (int t = 0; t < ntheta; ++t) {
                    double g = cp[0] * ct[t] + cp[1] * st[t] + rp;
                    ring += r * std::sqrt(1.0 + g * g);
                }
                return ring * (2.0 * std::numbers::pi / ntheta);
            },
            L, n);
    }

    double r0 = spec.outer_radius(0.0), rL = spec.outer_radius(L);
    a.cap_area_mm2 = std::numbers::pi * (r0 * r0 + rL * rL);
    a.surface_area_mm2 = a.lateral_area_mm2 + a.cap_area_mm2;

    a.centerline_arc_mm = detail::simpson(
        [&](double z) {
            auto cp = spec.axis_dz(z);
            return std::sqrt(1.0 + cp[0] * cp[0] + cp[1] * cp[1]);
        },
        L, n);
    auto c0 = spec.axis_at(0.0), cL = spec.axis_at(L);
    a.centerline_chord_mm = std::sqrt((cL[0] - c0[0]) * (cL[0] - c0[0]) +
                                      (cL[1] - c0[1]) * (cL[1] - c0[1]) + L * L);
    a.tortuosity = a.centerline_arc_mm / a.centerline_chord_mm;

    a.axis_samples.reserve(spec.nz);
    for (int k = 0; k < spec.nz; ++k) {
        double z = (k + 0.5) * spec.sz;
        auto c = spec.axis_at(z);
        a.axis_samples.push_back({z, c[0], c[1], spec.outer_radius(z)});
    }
    return a;
}

struct PhantomData {
    Volume3D image;   // HU before windowing
    Volume3D gt;      // outer-wall region (lumen + thrombus)
    OrganLabelMap labels;
    PhantomAnalytic analytic;
};

inline PhantomData generate_phantom(const PhantomSpec& spec) {
    spec.validate();
    PhantomData out;
    out.analytic = analyze_phantom(spec);
    out.image = Volume3D(spec.nx, spec.ny, spec.nz, spec.sx, spec.sy, spec.sz,
                         VolumeKind::intensity);
    out.gt = Volume3D(spec.nx, spec.ny, spec.nz, spec.sx, spec.sy, spec.sz,
                      VolumeKind::binary_mask);
    out.labels.volume = Volume3D(spec.nx, spec.ny, spec.nz, spec.sx, spec.sy, spec.sz,
                                 VolumeKind::integer_labels);
    out.labels.label_table[1] = "aorta";
    out.labels.vascular_ids = {1};
    for (std::size_t k = 0; k < spec.distractors.size(); ++k) {
        int id = static_cast<int>(k) + 2;
        out.labels.label_table[id] = spec.distractors[k].name + "_" + std::to_string(id);
    }

    Rng rng(spec.seed);
    std::size_t idx = 0;
    for (int k = 0; k < spec.nz; ++k) {
        double z = (k + 0.5) * spec.sz;
        auto c = spec.axis_at(z);
        double r_out = spec.outer_radius(z);
        for (int j = 0; j < spec.ny; ++j) {
            double y = (j + 0.5) * spec.sy;
            for (int i = 0; i < spec.nx; ++i, ++idx) {
                double x = (i + 0.5) * spec.sx;
                double d = std::hypot(x - c[0], y - c[1]);
                double hu;
                if (d <= r_out) {
                    hu = d <= spec.lumen_radius_mm ? spec.lumen_hu : spec.thrombus_hu;
                    out.gt.data[idx] = 1.0;
                    out.labels.volume.data[idx] = 1.0;
                } else {
                    hu = spec.background_hu;
                    for (std::size_t e = 0; e < spec.distractors.size(); ++e) {
                        if (spec.distractors[e].contains(x, y, z)) {
                            hu = spec.distractors[e].intensity_at(x, y, z);
                            out.labels.volume.data[idx] = static_cast<double>(e + 2);
                            break;  // first listed ellipsoid wins on overlap
                        }
                    }
                    if (out.labels.volume.data[idx] == 0.0)
                        for (const auto& e : spec.soft_tissue)
                            if (e.contains(x, y, z)) {
                                hu = e.intensity_at(x, y, z);
                                break;
                            }
                }
                out.image.data[idx] = hu;
            }
        }
    }
    if (spec.noise_sigma_hu > 0.0)
        for (double& v : out.image.data) v += rng.normal(0.0, spec.noise_sigma_hu);
    return out;
}

/// key=value text serialization of the analytic record
inline void write_analytic_record(const PhantomAnalytic& a, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw io_error("write_analytic_record: cannot open " + path);
    std::fprintf(f, "max_outer_diameter_mm=%.17g\n", a.max_outer_diameter_mm);
    std::fprintf(f, "volume_mm3=%.17g\n", a.volume_mm3);
    std::fprintf(f, "lateral_area_mm2=%.17g\n", a.lateral_area_mm2);
    std::fprintf(f, "cap_area_mm2=%.17g\n", a.cap_area_mm2);
    std::fprintf(f, "surface_area_mm2=%.17g\n", a.surface_area_mm2);
    std::fprintf(f, "centerline_arc_mm=%.17g\n", a.centerline_arc_mm);
    std::fprintf(f, "centerline_chord_mm=%.17g\n", a.centerline_chord_mm);
    std::fprintf(f, "tortuosity=%.17g\n", a.tortuosity);
    for (std::size_t k = 0; k < a.axis_samples.size(); ++k) {
        const auto& s = a.axis_samples[k];
        std::fprintf(f, "axis.%zu=%.17g %.17g %.17g %.17g\n", k, s[0], s[1], s[2], s[3]);
    }
    std::fclose(f);
}

inline PhantomAnalytic read_analytic_record(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "r");
    if (!f) throw io_error("read_analytic_record: cannot open " + path);
    PhantomAnalytic a;
    char line[512];
    while (std::fgets(line, sizeof(line), f)) {
        std::string s(line);
        auto eq = s.find('=');
        if (eq == std::string::npos) continue;
        std::string key = s.substr(0, eq), val = s.substr(eq + 1);
        if (key == "max_outer_diameter_mm") a.max_outer_diameter_mm = std::stod(val);
        else if (key == "volume_mm3") a.volume_mm3 = std::stod(val);
        else if (key == "lateral_area_mm2") a.lateral_area_mm2 = std::stod(val);
        else if (key == "cap_area_mm2") a.cap_area_mm2 = std::stod(val);
        else if (key == "surface_area_mm2") a.surface_area_mm2 = std::stod(val);
        else if (key == "centerline_arc_mm") a.centerline_arc_mm = std::stod(val);
        else if (key == "centerline_chord_mm") a.centerline_chord_mm = std::stod(val);
        else if (key == "tortuosity") a.tortuosity = std::stod(val);
        else if (key.rfind("axis.", 0) == 0) {
            std::array<double, 4> row{};
            if (std::sscanf(val.c_str(), "%lf %lf %lf %lf", &row[0], &row[1], &row[2], &row[3]) == 4)
                a.axis_samples.push_back(row);
        }
    }
    std::fclose(f);
    return a;
}

/// Patient-level split: every slice of a volume belongs to exactly one side.
struct Partition {
    std::vector<int> train, val, test;
};

inline Partition split_patients(std::vector<int> ids, int n_train, int n_val, int n_test,
                                std::uint64_t seed) {
    if (n_train < 0 || n_val < 0 || n_test < 0 ||
        static_cast<std::size_t>(n_train) + n_val + n_test != ids.size())
        throw config_error("split_patients: split sizes must be nonnegative and sum to the id count");
    Rng rng(seed);
    rng.shuffle(ids);
    Partition p;
    p.train.assign(ids.begin(), ids.begin() + n_train);
    p.val.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
    p.test.assign(ids.begin() + n_train + n_val, ids.end());
    return p;
}

}  // namespace vmorph
