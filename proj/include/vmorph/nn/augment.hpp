#pragma once

#include <array>
#include <cmath>
#include <numbers>

#include "vmorph/masked_loss.hpp"
#include "vmorph/rng.hpp"
#include "vmorph/volume.hpp"

namespace vmorph::nn {

struct AugmentConfig {
    double max_rotate_deg = 10.0;
    double max_translate_px = 10.0;
    double scale_lo = 0.9, scale_hi = 1.1;
    double flip_prob = 0.5;
    double intensity_lo = 0.9, intensity_hi = 1.1;  // multiplicative jitter (range is a guess,
                                                    // magnitude unspecified upstream)
    double noise_sigma = 0.01;                      // additive, on the [0,1] intensity scale
    double elastic_max_px = 5.0;                    // peak displacement of the 4x4 grid
    double elastic_prob = 0.5;
};

/// One concrete draw. Identity-by-default so deterministic tests can pin
/// individual knobs.
struct AugmentParams {
    double rotate_deg = 0.0;
    bool flip_h = false;
    double dx_px = 0.0, dy_px = 0.0;
    double scale = 1.0;
    double intensity_scale = 1.0;
    double noise_sigma = 0.0;
    std::uint64_t noise_seed = 0;
    bool elastic = false;
    std::array<double, 16> elastic_dx{};  // 4x4 coarse grid, row-major
    std::array<double, 16> elastic_dy{};

    bool is_identity() const {
        if (rotate_deg != 0.0 || flip_h || dx_px != 0.0 || dy_px != 0.0 || scale != 1.0 ||
            intensity_scale != 1.0 || noise_sigma != 0.0 || elastic)
            return false;
        return true;
    }
};

inline AugmentParams sample_augment_params(const AugmentConfig& cfg, Rng& rng) {
    AugmentParams p;
    p.rotate_deg = rng.uniform(-cfg.max_rotate_deg, cfg.max_rotate_deg);
    p.flip_h = rng.uniform() < cfg.flip_prob;
    p.dx_px = rng.uniform(-cfg.max_translate_px, cfg.max_translate_px);
    p.dy_px = rng.uniform(-cfg.max_translate_px, cfg.max_translate_px);
    p.scale = rng.uniform(cfg.scale_lo, cfg.scale_hi);
    p.intensity_scale = rng.uniform(cfg.intensity_lo, cfg.intensity_hi);
    p.noise_sigma = cfg.noise_sigma;
    p.noise_seed = rng.next_u64();
    p.elastic = rng.uniform() < cfg.elastic_prob;
    for (int i = 0; i < 16; ++i) {
        double dx = rng.uniform(-cfg.elastic_max_px, cfg.elastic_max_px);
        double dy = rng.uniform(-cfg.elastic_max_px, cfg.elastic_max_px);
        if (p.elastic) {
            p.elastic_dx[i] = dx;
            p.elastic_dy[i] = dy;
        }
    }
    return p;
}

namespace detail {

inline double bilinear_px(const Slice2D& s, double y, double x, double fill) {
    if (y < -0.5 || x < -0.5 || y > s.height - 0.5 || x > s.width - 0.5) return fill;
    int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
    double fy = y - y0, fx = x - x0;
    auto at = [&](int yy, int xx) {
        yy = std::clamp(yy, 0, s.height - 1);
        xx = std::clamp(xx, 0, s.width - 1);
        return s.at(yy, xx);
    };
    double a = at(y0, x0) * (1 - fx) + at(y0, x0 + 1) * fx;
    double b = at(y0 + 1, x0) * (1 - fx) + at(y0 + 1, x0 + 1) * fx;
    return a * (1 - fy) + b * fy;
}

inline double nearest_px(const Slice2D& s, double y, double x, double fill) {
    int yy = static_cast<int>(std::lround(y)), xx = static_cast<int>(std::lround(x));
    if (yy < 0 || xx < 0 || yy >= s.height || xx >= s.width) return fill;
    return s.at(yy, xx);
}

// coarse 4x4 grid bilinearly stretched over the image; nodes sit on the corners
inline std::array<double, 2> elastic_shift(const AugmentParams& p, double y, double x, int h,
                                           int w) {
    double gy = (h > 1) ? y / (h - 1) * 3.0 : 0.0;
    double gx = (w > 1) ? x / (w - 1) * 3.0 : 0.0;
    int iy = std::clamp(static_cast<int>(std::floor(gy)), 0, 2);
    int ix = std::clamp(static_cast<int>(std::floor(gx)), 0, 2);
    double fy = gy - iy, fx = gx - ix;
    auto lerp2 = [&](const std::array<double, 16>& g) {
        double a = g[iy * 4 + ix] * (1 - fx) + g[iy * 4 + ix + 1] * fx;
        double b = g[(iy + 1) * 4 + ix] * (1 - fx) + g[(iy + 1) * 4 + ix + 1] * fx;
        return a * (1 - fy) + b * fy;
    };
    return {lerp2(p.elastic_dy), lerp2(p.elastic_dx)};
}

}  // namespace detail

/// Applies the same spatial warp to image, ground truth, and allow mask
/// (bilinear for the image, nearest for the masks); photometric changes touch
/// only the image. Out-of-field pixels become background: image fill 0,
/// gt fill 0, allow fill 1.
inline void augment_pair(Slice2D& image, Slice2D& gt, AllowMask& allow,
                         const AugmentParams& p) {
    if (image.height != gt.height || image.width != gt.width || image.height != allow.height ||
        image.width != allow.width)
        throw value_error("augment_pair: shapes differ");
    if (p.is_identity()) return;

    const int h = image.height, w = image.width;
    const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
    const double th = p.rotate_deg * std::numbers::pi / 180.0;
    const double cs = std::cos(th), sn = std::sin(th);

    Slice2D img_out(h, w, image.sx, image.sy), gt_out(h, w, gt.sx, gt.sy);
    AllowMask allow_out(h, w);
    Slice2D allow_slice(h, w, 1.0, 1.0);
    allow_slice.data = allow.data;

    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            // invert: undo translation, then rotation+scale about the center, then flip
            double uy = y - cy - p.dy_px;
            double ux = x - cx - p.dx_px;
            double ry = (-sn * ux + cs * uy) / p.scale;
            double rx = (cs * ux + sn * uy) / p.scale;
            double sy = ry + cy;
            double sx = rx + cx;
            if (p.flip_h) sx = (w - 1) - sx;
            if (p.elastic) {
                auto d = detail::elastic_shift(p, sy, sx, h, w);
                sy += d[0];
                sx += d[1];
            }
            img_out.at(y, x) = detail::bilinear_px(image, sy, sx, 0.0);
            gt_out.at(y, x) = detail::nearest_px(gt, sy, sx, 0.0);
            allow_out.data[static_cast<std::size_t>(y) * w + x] =
                detail::nearest_px(allow_slice, sy, sx, 1.0);
        }

    if (p.intensity_scale != 1.0)
        for (double& v : img_out.data) v *= p.intensity_scale;
    if (p.noise_sigma > 0.0) {
        Rng noise(p.noise_seed);
        for (double& v : img_out.data) v += noise.normal(0.0, p.noise_sigma);
    }

    image = std::move(img_out);
    gt = std::move(gt_out);
    allow.data = std::move(allow_out.data);
}

}  // namespace vmorph::nn
