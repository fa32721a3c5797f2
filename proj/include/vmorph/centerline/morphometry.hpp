#pragma once

#include <cstdio>
#include <optional>

#include "vmorph/centerline/cross_section.hpp"
#include "vmorph/centerline/frames.hpp"

namespace vmorph {

struct CenterlinePoint {
    Vec3 position_mm;
    Vec3 tangent;
    double s_mm = 0.0;       // arc length from the inlet
    double kappa_per_mm = 0.0;
    bool section_ok = false;  // plane cut succeeded and the point was inside
    double r_inscribed_mm = 0.0;
    double r_equiv_area_mm = 0.0;
    double d_max_chord_mm = 0.0;
};

struct Centerline {
    std::vector<CenterlinePoint> points;
    double arc_length_mm = 0.0;
    double chord_mm = 0.0;

    double tortuosity() const {
        if (chord_mm <= 0.0) throw value_error("Centerline: coincident endpoints");
        return arc_length_mm / chord_mm;
    }
};

namespace detail {

// curvature as the inverse circumradius of three consecutive points;
// collinear triples count as straight
inline double circumradius_curvature(const Vec3& a, const Vec3& b, const Vec3& c) {
    const double la = norm(b - a), lb = norm(c - b), lc = norm(c - a);
    const double area2 = norm(cross(b - a, c - a));  // twice the triangle area
    const double denom = la * lb * lc;
    if (denom == 0.0) return 0.0;
    return 2.0 * area2 / denom;
}

}  // namespace detail

/// Decorates an ordered path (ideally the 1 mm-resampled fast-marching output)
/// with arc length, tangents, curvature, and per-point lumen radii measured on
/// plane cuts of the mesh. Cuts that miss the mesh or land outside their loop
/// (grazing the caps, typically) are flagged rather than fatal.
inline Centerline build_centerline(const std::vector<Vec3>& path, const TriMesh& mesh,
                                   int tangent_window = 2) {
    Centerline line;
    const auto frames = local_frames(path, tangent_window);  // validates the path too
    line.points.resize(path.size());
    for (std::size_t i = 0; i < path.size(); ++i) {
        auto& cp = line.points[i];
        cp.position_mm = path[i];
        cp.tangent = frames[i].tangent;
        if (i > 0) cp.s_mm = line.points[i - 1].s_mm + norm(path[i] - path[i - 1]);
        if (i > 0 && i + 1 < path.size())
            cp.kappa_per_mm =
                detail::circumradius_curvature(path[i - 1], path[i], path[i + 1]);
        try {
            CrossSection cs = cross_section(mesh, path[i], frames[i].tangent);
            RadiusMeasures r = radius_measures(cs);
            cp.section_ok = true;
            cp.r_inscribed_mm = r.r_inscribed_mm;
            cp.r_equiv_area_mm = r.r_equiv_area_mm;
            cp.d_max_chord_mm = r.d_max_chord_mm;
        } catch (const value_error&) {
            cp.section_ok = false;
        }
    }
    line.arc_length_mm = line.points.back().s_mm;
    line.chord_mm = norm(path.back() - path.front());
    return line;
}

struct MorphometryReport {
    double max_diameter_mm = 0.0;       // max d_max_chord over usable sections
    double surface_area_mm2 = 0.0;
    double volume_mm3 = 0.0;
    double tortuosity = 1.0;
    double centerline_length_mm = 0.0;
    double mean_curvature_per_mm = 0.0;
    double max_curvature_per_mm = 0.0;
    double diameter_over_length = 0.0;  // size descriptor, dimensionless
    int sections_used = 0;
};

inline MorphometryReport morphometry(const Centerline& line, const TriMesh& mesh) {
    if (line.points.empty()) throw value_error("morphometry: empty centerline");
    MorphometryReport rep;
    const MeshMeasures mm = mesh_measures(mesh);
    rep.surface_area_mm2 = mm.area_mm2;
    rep.volume_mm3 = mm.volume_mm3;
    rep.tortuosity = line.tortuosity();
    rep.centerline_length_mm = line.arc_length_mm;
    double kappa_sum = 0.0;
    int kappa_n = 0;
    for (const auto& p : line.points) {
        if (p.section_ok) {
            rep.max_diameter_mm = std::max(rep.max_diameter_mm, p.d_max_chord_mm);
            ++rep.sections_used;
        }
        if (&p != &line.points.front() && &p != &line.points.back()) {
            kappa_sum += p.kappa_per_mm;
            rep.max_curvature_per_mm = std::max(rep.max_curvature_per_mm, p.kappa_per_mm);
            ++kappa_n;
        }
    }
    if (rep.sections_used == 0)
        throw value_error("morphometry: no centerline point produced a usable cross-section");
    if (kappa_n > 0) rep.mean_curvature_per_mm = kappa_sum / kappa_n;
    if (line.arc_length_mm > 0.0)
        rep.diameter_over_length = rep.max_diameter_mm / line.arc_length_mm;
    return rep;
}

/// Clinical-style summary in cm units, one measure per row, with an optional
/// reference column, e.g. "Maximal Diameter (pred) 5.3 cm / (true) 5.8 cm".
struct MorphometryReference {
    double max_diameter_mm = 0.0;
    double surface_area_mm2 = 0.0;
    double volume_mm3 = 0.0;
};

inline std::string format_morphometry(const MorphometryReport& rep,
                                      const std::optional<MorphometryReference>& ref = {}) {
    char buf[160];
    std::string out;
    auto row = [&](const char* label, double pred, double truth, const char* unit) {
        if (ref)
            std::snprintf(buf, sizeof buf, "%s (pred) %.1f %s / (true) %.1f %s\n", label, pred,
                          unit, truth, unit);
        else
            std::snprintf(buf, sizeof buf, "%s (pred) %.1f %s\n", label, pred, unit);
        out += buf;
    };
    row("Maximal Diameter", rep.max_diameter_mm / 10.0,
        ref ? ref->max_diameter_mm / 10.0 : 0.0, "cm");
    row("Surface Area", rep.surface_area_mm2 / 100.0,
        ref ? ref->surface_area_mm2 / 100.0 : 0.0, "cm^2");
    row("Volume", rep.volume_mm3 / 1000.0, ref ? ref->volume_mm3 / 1000.0 : 0.0, "cm^3");
    std::snprintf(buf, sizeof buf, "Tortuosity %.3f\n", rep.tortuosity);
    out += buf;
    std::snprintf(buf, sizeof buf, "Centerline Length %.1f cm\n",
                  rep.centerline_length_mm / 10.0);
    out += buf;
    return out;
}

/// x,y,z plus per-point descriptor columns, %.17g so re-reading is lossless.
inline void write_centerline_csv(const Centerline& line, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw io_error("write_centerline_csv: cannot open " + path);
    std::fprintf(f, "x_mm,y_mm,z_mm,s_mm,kappa_per_mm,r_inscribed_mm,r_equiv_area_mm,"
                    "d_max_chord_mm\n");
    for (const auto& p : line.points)
        std::fprintf(f, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", p.position_mm[0],
                     p.position_mm[1], p.position_mm[2], p.s_mm, p.kappa_per_mm,
                     p.section_ok ? p.r_inscribed_mm : 0.0,
                     p.section_ok ? p.r_equiv_area_mm : 0.0,
                     p.section_ok ? p.d_max_chord_mm : 0.0);
    std::fclose(f);
}

/// Diameter profile d(s) over the usable sections.
inline void write_diameter_profile_csv(const Centerline& line, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw io_error("write_diameter_profile_csv: cannot open " + path);
    std::fprintf(f, "s_mm,diameter_mm\n");
    for (const auto& p : line.points)
        if (p.section_ok) std::fprintf(f, "%.17g,%.17g\n", p.s_mm, p.d_max_chord_mm);
    std::fclose(f);
}

inline void write_morphometry_csv(const MorphometryReport& rep, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw io_error("write_morphometry_csv: cannot open " + path);
    std::fprintf(f, "measure,value\n");
    std::fprintf(f, "max_diameter_mm,%.17g\n", rep.max_diameter_mm);
    std::fprintf(f, "surface_area_mm2,%.17g\n", rep.surface_area_mm2);
    std::fprintf(f, "volume_mm3,%.17g\n", rep.volume_mm3);
    std::fprintf(f, "tortuosity,%.17g\n", rep.tortuosity);
    std::fprintf(f, "centerline_length_mm,%.17g\n", rep.centerline_length_mm);
    std::fprintf(f, "mean_curvature_per_mm,%.17g\n", rep.mean_curvature_per_mm);
    std::fprintf(f, "max_curvature_per_mm,%.17g\n", rep.max_curvature_per_mm);
    std::fprintf(f, "diameter_over_length,%.17g\n", rep.diameter_over_length);
    std::fprintf(f, "sections_used,%d\n", rep.sections_used);
    std::fclose(f);
}

}  // namespace vmorph
