// Acceptance gate: one PASS/FAIL line per criterion, every tolerance pinned
// here in code. Run via ctest (test name "acceptance") or directly.

#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "vmorph/centerline/morphometry.hpp"
#include "vmorph/experiment.hpp"
#include "vmorph/mesh/mesh_io.hpp"
#include "vmorph/nifti.hpp"

using namespace vmorph;

namespace {

bool report(const char* id, const char* what, bool ok) {
    std::printf("[%s] %s: %s\n", id, what, ok ? "PASS" : "FAIL");
    std::fflush(stdout);
    return ok;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// relative error with a small absolute floor so central-difference roundoff
// (~1e-10 at step 1e-6) cannot fail a near-zero gradient spuriously
double rel_err(double fd, double an) {
    return std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-3});
}

Volume3D ball_volume(int n, double r) {
    Volume3D vol(n, n, n, 1.0, 1.0, 1.0, VolumeKind::binary_mask);
    const double c = (n - 1) / 2.0;
    for (int z = 0; z < n; ++z)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x)
                if (std::hypot(x - c, y - c, z - c) <= r) vol.at(x, y, z) = 1.0;
    return vol;
}

Volume3D cylinder_mask(int nx, int ny, int nz, double cx, double cy, double r) {
    Volume3D vol(nx, ny, nz, 1.0, 1.0, 1.0, VolumeKind::binary_mask);
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x)
                if (std::hypot(x - cx, y - cy) <= r) vol.at(x, y, z) = 1.0;
    return vol;
}

struct RandomCase {
    SliceTensor p, y;
    AllowMask a;
};

RandomCase random_case(Rng& rng, int h, int w, double masked_fraction) {
    RandomCase c{SliceTensor(h, w), SliceTensor(h, w), AllowMask(h, w)};
    for (std::size_t i = 0; i < c.p.size(); ++i) {
        c.p.data[i] = rng.uniform(0.01, 0.99);
        c.y.data[i] = rng.coin() ? 1.0 : 0.0;
        c.a.data[i] = rng.uniform() < masked_fraction ? 0.0 : 1.0;
    }
    return c;
}

}  // namespace

TEST_CASE("analytic loss gradients match finite differences", "[A1]") {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(11);
    MaskedLossConfig lcfg;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        RandomCase c = random_case(rng, 8, 8, 0.15);  // N = 64 pixels
        SliceTensor g = masked_combined_loss_grad(c.p, c.y, c.a, lcfg);
        const double step = 1e-6;
        for (std::size_t i = 0; i < c.p.size(); ++i) {
            const double keep = c.p.data[i];
            c.p.data[i] = keep + step;
            const double hi = masked_combined_loss(c.p, c.y, c.a, lcfg);
            c.p.data[i] = keep - step;
            const double lo = masked_combined_loss(c.p, c.y, c.a, lcfg);
            c.p.data[i] = keep;
            worst = std::max(worst, rel_err((hi - lo) / (2 * step), g.data[i]));
        }
    }
    const double wall = seconds_since(t0);
    REQUIRE(report("A1", "combined loss gradient vs central differences (100 tensors, N=64)",
                   worst < 1e-5 && wall < 5.0));
}

TEST_CASE("masking is exact and the all-ones mask is the unmasked loss", "[A2]") {
    Rng rng(12);
    MaskedLossConfig lcfg;
    bool ok = true;
    for (int trial = 0; trial < 100; ++trial) {
        RandomCase c = random_case(rng, 8, 8, 0.3);

        // scrambling every disallowed prediction must change nothing, bit for bit
        const double dice = masked_dice_loss(c.p, c.y, c.a, lcfg);
        const double bce = masked_bce_loss(c.p, c.y, c.a, lcfg);
        const double comb = masked_combined_loss(c.p, c.y, c.a, lcfg);
        SliceTensor scrambled = c.p;
        for (std::size_t i = 0; i < scrambled.size(); ++i)
            if (c.a.data[i] == 0.0) scrambled.data[i] = rng.uniform(0.01, 0.99);
        ok = ok && masked_dice_loss(scrambled, c.y, c.a, lcfg) == dice;
        ok = ok && masked_bce_loss(scrambled, c.y, c.a, lcfg) == bce;
        ok = ok && masked_combined_loss(scrambled, c.y, c.a, lcfg) == comb;

        // all-ones mask must reproduce independently computed unmasked losses
        AllowMask ones(c.p.height, c.p.width, 1.0);
        double apy = 0.0, ap = 0.0, ay = 0.0, bsum = 0.0;
        for (std::size_t i = 0; i < c.p.size(); ++i) {
            apy += c.p.data[i] * c.y.data[i];
            ap += c.p.data[i];
            ay += c.y.data[i];
            const double pc = std::min(std::max(c.p.data[i], lcfg.prob_clamp),
                                       1.0 - lcfg.prob_clamp);
            bsum += -(c.y.data[i] * std::log(pc) + (1.0 - c.y.data[i]) * std::log(1.0 - pc));
        }
        const double dice_ref = 1.0 - (2.0 * apy + lcfg.epsilon) / (ap + ay + lcfg.epsilon);
        // the pixel count carries the same epsilon guard as the masked mean
        const double bce_ref = bsum / (static_cast<double>(c.p.size()) + lcfg.epsilon);
        ok = ok && masked_dice_loss(c.p, c.y, ones, lcfg) == dice_ref;
        ok = ok && masked_bce_loss(c.p, c.y, ones, lcfg) == bce_ref;
        ok = ok && masked_combined_loss(c.p, c.y, ones, lcfg) ==
                       lcfg.bce_weight * bce_ref + (1.0 - lcfg.bce_weight) * dice_ref;
    }
    REQUIRE(report("A2", "bit-exact masking invariance and unmasked reduction (100 tensors)", ok));
}

TEST_CASE("tiny network end-to-end gradients match finite differences", "[A3]") {
    const auto t0 = std::chrono::steady_clock::now();
    nn::UNetConfig cfg;
    cfg.levels = 1;
    cfg.base_channels = 2;
    cfg.use_batchnorm = false;
    cfg.seed = 3;
    nn::UNet net(cfg);

    const int hw = 8;
    nn::Tensor4 x(1, 1, hw, hw);
    SliceTensor gt(hw, hw);
    AllowMask allow(hw, hw);
    Rng rng(4);
    for (int i = 0; i < hw * hw; ++i) {
        x.data[static_cast<std::size_t>(i)] = rng.uniform();
        gt.data[static_cast<std::size_t>(i)] = rng.coin() ? 1.0 : 0.0;
        allow.data[static_cast<std::size_t>(i)] = rng.uniform() < 0.85 ? 1.0 : 0.0;
    }
    MaskedLossConfig lcfg;

    auto loss_now = [&] {
        nn::Tensor4 prob = net.forward(x, true);
        SliceTensor p(hw, hw);
        p.data = prob.data;
        return masked_combined_loss(p, gt, allow, lcfg);
    };

    nn::Tensor4 prob = net.forward(x, true);
    SliceTensor p(hw, hw);
    p.data = prob.data;
    SliceTensor g = masked_combined_loss_grad(p, gt, allow, lcfg);
    nn::Tensor4 gp(1, 1, hw, hw);
    gp.data = g.data;
    net.zero_grad();
    net.backward(gp);

    double worst = 0.0;
    const double step = 1e-6;
    for (auto& pr : net.parameters())
        for (std::size_t i = 0; i < pr.size; ++i) {
            const double keep = pr.value[i];
            pr.value[i] = keep + step;
            const double hi = loss_now();
            pr.value[i] = keep - step;
            const double lo = loss_now();
            pr.value[i] = keep;
            worst = std::max(worst, rel_err((hi - lo) / (2 * step), pr.grad[i]));
        }
    const double wall = seconds_since(t0);
    REQUIRE(report("A3", "all network parameter gradients vs finite differences",
                   worst < 1e-4 && wall < 60.0));
}

TEST_CASE("anatomy-aware training beats the baseline on held-out phantoms", "[A4]") {
    const auto t0 = std::chrono::steady_clock::now();

    ExperimentConfig cfg;  // 15 phantoms split 10/2/3 with distractor organs
    cfg.train.lr = 2e-4;
    cfg.train.max_epochs = 12;
    cfg.validate();

    int wins = 0;
    double anatomy_sum = 0.0;
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        cfg.seed = seed;
        CompareResult res = run_compare(cfg);
        const double anatomy = res.arms[0].test.dice_mean;
        const double baseline = res.arms[1].test.dice_mean;
        anatomy_sum += anatomy;
        if (anatomy > baseline) ++wins;
        std::printf("    seed %llu: anatomy-aware %.4f vs baseline %.4f (%d test slices)\n",
                    static_cast<unsigned long long>(seed), anatomy, baseline,
                    res.arms[0].test.dice_slices);
        std::fflush(stdout);
    }
    const double anatomy_mean = anatomy_sum / 3.0;
    const double wall = seconds_since(t0);
    std::printf("    wins %d/3, anatomy-aware mean dice %.4f, wall %.0f s\n", wins, anatomy_mean,
                wall);
    REQUIRE(report("A4", "contrast experiment: >= 2/3 seed wins, mean dice >= 0.80, < 30 min",
                   wins >= 2 && anatomy_mean >= 0.80 && wall < 1800.0));
}

TEST_CASE("geometry pipeline oracles", "[A5]") {
    bool ok = true;

    // smoothed ball vs analytic sphere, and smoothing drift ordering
    {
        Volume3D ball = ball_volume(46, 20.0);
        TriMesh mesh = marching_cubes(gaussian_smooth(ball, 1.0), 0.5);
        const double area_true = 4.0 * std::numbers::pi * 400.0;
        const double vol_true = (4.0 / 3.0) * std::numbers::pi * 8000.0;
        MeshMeasures m = mesh_measures(mesh);
        ok = ok && std::abs(m.area_mm2 - area_true) / area_true < 0.02;
        ok = ok && std::abs(m.volume_mm3 - vol_true) / vol_true < 0.02;

        const double v0 = m.volume_mm3;
        const double drift_tau =
            std::abs(mesh_measures(taubin_smooth(mesh, 10, 0.5, -0.53)).volume_mm3 - v0) / v0;
        const double drift_lap =
            std::abs(mesh_measures(laplacian_smooth(mesh, 10, 0.5)).volume_mm3 - v0) / v0;
        ok = ok && drift_tau < 0.01 && drift_lap > drift_tau;
    }

    // exact distance transform vs brute force on random 16^3 masks
    {
        Rng rng(77);
        for (int trial = 0; trial < 3; ++trial) {
            Volume3D mask(16, 16, 16, 1.0, 1.0, 1.0, VolumeKind::binary_mask);
            for (double& v : mask.data) v = rng.uniform() < 0.45 ? 1.0 : 0.0;
            mask.data[0] = 0.0;  // keep at least one background voxel
            DistanceField d = distance_transform(mask);
            for (int z = 0; z < 16 && ok; ++z)
                for (int y = 0; y < 16 && ok; ++y)
                    for (int x = 0; x < 16 && ok; ++x) {
                        if (mask.at(x, y, z) == 0.0) continue;
                        double best2 = std::numeric_limits<double>::infinity();
                        for (int k = 0; k < 16; ++k)
                            for (int j = 0; j < 16; ++j)
                                for (int i = 0; i < 16; ++i)
                                    if (mask.at(i, j, k) == 0.0)
                                        best2 = std::min(
                                            best2, double((i - x) * (i - x) + (j - y) * (j - y) +
                                                          (k - z) * (k - z)));
                        ok = ok && d.at(x, y, z) == std::sqrt(best2);
                    }
        }
    }

    // straight tube: centerline on-axis, radii (R, R, 2R), tortuosity 1
    {
        Volume3D tube = cylinder_mask(21, 21, 40, 10.0, 10.0, 6.0);
        DistanceField dist = distance_transform(tube);
        auto ends = select_endpoints(dist);
        FmmResult r = fast_march(dist, ends.first, ends.second);
        for (const auto& q : r.path_mm)
            ok = ok && std::hypot(q[0] - 10.5, q[1] - 10.5) <= 0.5;  // voxel-center axis

        Volume3D wide = cylinder_mask(33, 33, 44, 16.0, 16.0, 15.0);
        DistanceField wdist = distance_transform(wide);
        auto wends = select_endpoints(wdist);
        FmmResult wr = fast_march(wdist, wends.first, wends.second);
        ReconOptions crisp;  // pure Taubin smoothing preserves the radius
        crisp.laplacian_iterations = 0;
        TriMesh mesh = reconstruct_mesh(wide, crisp);
        Centerline line = build_centerline(wr.path_mm, mesh);

        const double R = 15.0;
        int used = 0;
        for (std::size_t i = line.points.size() / 4; i < 3 * line.points.size() / 4; ++i) {
            const auto& pt = line.points[i];
            if (pt.r_inscribed_mm <= 0.0) continue;
            ++used;
            ok = ok && std::abs(pt.r_inscribed_mm - R) / R < 0.02;
            ok = ok && std::abs(pt.r_equiv_area_mm - R) / R < 0.02;
            ok = ok && std::abs(pt.d_max_chord_mm - 2.0 * R) / (2.0 * R) < 0.02;
        }
        ok = ok && used > 10;
        ok = ok && std::abs(line.tortuosity() - 1.0) <= 0.01;
    }

    REQUIRE(report("A5", "sphere measures, smoothing drift, exact EDT, cylinder centerline", ok));
}

TEST_CASE("phantom morphometry reproduces the analytic record", "[A6]") {
    PhantomSpec spec;  // bulged template
    PhantomData data = generate_phantom(spec);

    TriMesh mesh = reconstruct_mesh(data.gt, ReconOptions{});
    DistanceField dist = distance_transform(data.gt);
    auto ends = select_endpoints(dist);
    FmmResult r = fast_march(dist, ends.first, ends.second);
    MorphometryReport rep = morphometry(build_centerline(r.path_mm, mesh), mesh);

    const PhantomAnalytic& a = data.analytic;
    const double d_err = std::abs(rep.max_diameter_mm - a.max_outer_diameter_mm) /
                         a.max_outer_diameter_mm;
    const double s_err = std::abs(rep.surface_area_mm2 - a.surface_area_mm2) / a.surface_area_mm2;
    const double v_err = std::abs(rep.volume_mm3 - a.volume_mm3) / a.volume_mm3;
    std::printf("    diameter %.1f/%.1f mm, area %.0f/%.0f mm^2, volume %.0f/%.0f mm^3\n",
                rep.max_diameter_mm, a.max_outer_diameter_mm, rep.surface_area_mm2,
                a.surface_area_mm2, rep.volume_mm3, a.volume_mm3);
    REQUIRE(report("A6", "gt-mesh diameter, area, volume within 5% of quadrature record",
                   d_err < 0.05 && s_err < 0.05 && v_err < 0.05));
}

TEST_CASE("file format round-trips", "[A7]") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "vmorph_acceptance_a7";
    fs::create_directories(dir);
    bool ok = true;

    {
        Volume3D vol(7, 6, 5, 0.7, 1.3, 2.1, VolumeKind::intensity);
        Rng rng(9);
        for (double& v : vol.data) v = rng.normal(0.0, 100.0);
        write_nifti(vol, dir / "rt.nii");
        Volume3D back = read_nifti(dir / "rt.nii");
        // The voxel payload must survive bit-exactly. Spacings live in the
        // header's 32-bit pixdim fields, so compare them at that precision.
        ok = ok && back.data == vol.data && back.nx == vol.nx && back.ny == vol.ny &&
             back.nz == vol.nz && static_cast<float>(back.sx) == static_cast<float>(vol.sx) &&
             static_cast<float>(back.sy) == static_cast<float>(vol.sy) &&
             static_cast<float>(back.sz) == static_cast<float>(vol.sz);
    }

    TriMesh mesh = marching_cubes(gaussian_smooth(ball_volume(20, 7.0), 1.0), 0.5);
    const MeshMeasures m0 = mesh_measures(mesh);
    {
        write_obj(mesh, (dir / "rt.obj").string());
        TriMesh back = read_obj((dir / "rt.obj").string());
        MeshMeasures m = mesh_measures(back);
        ok = ok && back.vertices.size() == mesh.vertices.size() &&
             back.triangles.size() == mesh.triangles.size();
        ok = ok && std::abs(m.area_mm2 - m0.area_mm2) / m0.area_mm2 < 1e-6;
        ok = ok && std::abs(m.volume_mm3 - m0.volume_mm3) / m0.volume_mm3 < 1e-6;
    }
    {
        write_stl(mesh, (dir / "rt.stl").string());
        TriMesh back = read_stl((dir / "rt.stl").string());
        MeshMeasures m = mesh_measures(back);
        ok = ok && back.triangles.size() == mesh.triangles.size();
        ok = ok && std::abs(m.area_mm2 - m0.area_mm2) / m0.area_mm2 < 1e-5;
        ok = ok && std::abs(m.volume_mm3 - m0.volume_mm3) / m0.volume_mm3 < 1e-5;
    }
    fs::remove_all(dir);
    REQUIRE(report("A7", "NIfTI bit-exact, OBJ 1e-6 and STL 1e-5 mesh round-trips", ok));
}

TEST_CASE("compare subcommand is byte-identical across reruns", "[A8]") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "vmorph_acceptance_a8";
    fs::remove_all(dir);
    fs::create_directories(dir);

    const std::string cfg_text =
        "[experiment]\nphantoms = 3\nn_train = 1\nn_val = 1\nn_test = 1\nslice_stride = 24\n"
        "[train]\nmax_epochs = 2\n";
    {
        std::FILE* f = std::fopen((dir / "tiny.cfg").c_str(), "w");
        REQUIRE(f != nullptr);
        std::fwrite(cfg_text.data(), 1, cfg_text.size(), f);
        std::fclose(f);
    }

    auto slurp = [](const fs::path& p) {
        std::FILE* f = std::fopen(p.c_str(), "rb");
        REQUIRE(f != nullptr);
        std::string text;
        char buf[4096];
        std::size_t n;
        while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) text.append(buf, n);
        std::fclose(f);
        return text;
    };

    bool ok = true;
    for (const char* run : {"r1", "r2"}) {
        std::string cmd = std::string("\"") + VMORPH_CLI_PATH + "\" compare --config \"" +
                          (dir / "tiny.cfg").string() + "\" --out \"" + (dir / run).string() +
                          "\" --seed 7 > \"" + (dir / run).string() + ".log\" 2>&1";
        ok = ok && std::system(cmd.c_str()) == 0;
    }
    for (const char* name :
         {"compare.csv", "checkpoint_anatomy-aware.bin", "checkpoint_baseline.bin"})
        ok = ok && slurp(dir / "r1" / name) == slurp(dir / "r2" / name);
    fs::remove_all(dir);
    REQUIRE(report("A8", "compare --seed 7 twice: identical CSVs and checkpoints", ok));
}
