#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "vmorph/nn/tensor4.hpp"
#include "vmorph/rng.hpp"

namespace vmorph::nn {

/// View of one learnable array and its gradient, for the optimizer and
/// checkpoint code.
struct ParamRef {
    double* value = nullptr;
    double* grad = nullptr;
    std::size_t size = 0;
};

/// Non-learnable state that still belongs in a checkpoint (batchnorm running
/// statistics).
struct BufferRef {
    double* value = nullptr;
    std::size_t size = 0;
};

/// 3x3 convolution, stride 1, zero padding 1; spatial dims preserved.
struct Conv3x3 {
    int cin = 0, cout = 0;
    std::vector<double> weight, wgrad;  // [cout][cin][3][3]
    std::vector<double> bias, bgrad;    // [cout]
    Tensor4 input;                      // forward cache

    Conv3x3() = default;
    Conv3x3(int cin_, int cout_, Rng& rng) : cin(cin_), cout(cout_) {
        weight.resize(static_cast<std::size_t>(cout) * cin * 9);
        wgrad.resize(weight.size(), 0.0);
        bias.resize(cout);
        bgrad.resize(cout, 0.0);
        double bound = 1.0 / std::sqrt(static_cast<double>(cin) * 9);
        for (auto& v : weight) v = rng.uniform(-bound, bound);
        for (auto& v : bias) v = rng.uniform(-bound, bound);
    }

    double wat(int co, int ci, int u, int v) const {
        return weight[((static_cast<std::size_t>(co) * cin + ci) * 3 + u) * 3 + v];
    }
    double& wgrad_at(int co, int ci, int u, int v) {
        return wgrad[((static_cast<std::size_t>(co) * cin + ci) * 3 + u) * 3 + v];
    }

    Tensor4 forward(const Tensor4& x) {
        if (x.c != cin) throw value_error("Conv3x3: channel mismatch");
        input = x;
        Tensor4 y(x.n, cout, x.h, x.w);
        const int H = x.h, W = x.w;
        for (int in = 0; in < x.n; ++in)
            for (int co = 0; co < cout; ++co) {
                double* yp = y.plane(in, co);
                for (std::size_t i = 0; i < static_cast<std::size_t>(H) * W; ++i)
                    yp[i] = bias[co];
                for (int ci = 0; ci < cin; ++ci) {
                    const double* xp = x.plane(in, ci);
                    for (int u = 0; u < 3; ++u)
                        for (int v = 0; v < 3; ++v) {
                            const double wv = wat(co, ci, u, v);
                            if (wv == 0.0) continue;
                            const int dy = u - 1, dx = v - 1;
                            const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
                            const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
                            for (int yy = y0; yy < y1; ++yy) {
                                double* yrow = yp + static_cast<std::size_t>(yy) * W;
                                const double* xrow =
                                    xp + static_cast<std::size_t>(yy + dy) * W + dx;
                                for (int xx = x0; xx < x1; ++xx) yrow[xx] += wv * xrow[xx];
                            }
                        }
                }
            }
        return y;
    }

    Tensor4 backward(const Tensor4& gy) {
        const Tensor4& x = input;
        if (gy.n != x.n || gy.c != cout || gy.h != x.h || gy.w != x.w)
            throw value_error("Conv3x3: gradient shape mismatch");
        Tensor4 gx(x.n, cin, x.h, x.w);
        const int H = x.h, W = x.w;
        for (int in = 0; in < x.n; ++in)
            for (int co = 0; co < cout; ++co) {
                const double* gp = gy.plane(in, co);
                double bsum = 0.0;
                for (std::size_t i = 0; i < static_cast<std::size_t>(H) * W; ++i) bsum += gp[i];
                bgrad[co] += bsum;
                for (int ci = 0; ci < cin; ++ci) {
                    const double* xp = x.plane(in, ci);
                    double* gxp = gx.plane(in, ci);
                    for (int u = 0; u < 3; ++u)
                        for (int v = 0; v < 3; ++v) {
                            const int dy = u - 1, dx = v - 1;
                            const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
                            const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
                            double wsum = 0.0;
                            const double wv = wat(co, ci, u, v);
                            for (int yy = y0; yy < y1; ++yy) {
                                const double* grow = gp + static_cast<std::size_t>(yy) * W;
                                const double* xrow =
                                    xp + static_cast<std::size_t>(yy + dy) * W + dx;
                                double* gxrow = gxp + static_cast<std::size_t>(yy + dy) * W + dx;
                                for (int xx = x0; xx < x1; ++xx) {
                                    wsum += grow[xx] * xrow[xx];
                                    gxrow[xx] += wv * grow[xx];
                                }
                            }
                            wgrad_at(co, ci, u, v) += wsum;
                        }
                }
            }
        return gx;
    }

    void collect(std::vector<ParamRef>& out) {
        out.push_back({weight.data(), wgrad.data(), weight.size()});
        out.push_back({bias.data(), bgrad.data(), bias.size()});
    }
};

/// 1x1 convolution (pixelwise linear map across channels).
struct Conv1x1 {
    int cin = 0, cout = 0;
    std::vector<double> weight, wgrad;  // [cout][cin]
    std::vector<double> bias, bgrad;
    Tensor4 input;

    Conv1x1() = default;
    Conv1x1(int cin_, int cout_, Rng& rng) : cin(cin_), cout(cout_) {
        weight.resize(static_cast<std::size_t>(cout) * cin);
        wgrad.resize(weight.size(), 0.0);
        bias.resize(cout);
        bgrad.resize(cout, 0.0);
        double bound = 1.0 / std::sqrt(static_cast<double>(cin));
        for (auto& v : weight) v = rng.uniform(-bound, bound);
        for (auto& v : bias) v = rng.uniform(-bound, bound);
    }

    Tensor4 forward(const Tensor4& x) {
        if (x.c != cin) throw value_error("Conv1x1: channel mismatch");
        input = x;
        Tensor4 y(x.n, cout, x.h, x.w);
        const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
        for (int in = 0; in < x.n; ++in)
            for (int co = 0; co < cout; ++co) {
                double* yp = y.plane(in, co);
                for (std::size_t i = 0; i < plane; ++i) yp[i] = bias[co];
                for (int ci = 0; ci < cin; ++ci) {
                    const double wv = weight[static_cast<std::size_t>(co) * cin + ci];
                    const double* xp = x.plane(in, ci);
                    for (std::size_t i = 0; i < plane; ++i) yp[i] += wv * xp[i];
                }
            }
        return y;
    }

    Tensor4 backward(const Tensor4& gy) {
        const Tensor4& x = input;
        Tensor4 gx(x.n, cin, x.h, x.w);
        const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
        for (int in = 0; in < x.n; ++in)
            for (int co = 0; co < cout; ++co) {
                const double* gp = gy.plane(in, co);
                double bsum = 0.0;
                for (std::size_t i = 0; i < plane; ++i) bsum += gp[i];
                bgrad[co] += bsum;
                for (int ci = 0; ci < cin; ++ci) {
                    const double* xp = x.plane(in, ci);
                    double* gxp = gx.plane(in, ci);
                    const double wv = weight[static_cast<std::size_t>(co) * cin + ci];
                    double wsum = 0.0;
                    for (std::size_t i = 0; i < plane; ++i) {
                        wsum += gp[i] * xp[i];
                        gxp[i] += wv * gp[i];
                    }
                    wgrad[static_cast<std::size_t>(co) * cin + ci] += wsum;
                }
            }
        return gx;
    }

    void collect(std::vector<ParamRef>& out) {
        out.push_back({weight.data(), wgrad.data(), weight.size()});
        out.push_back({bias.data(), bgrad.data(), bias.size()});
    }
};

/// 2x2 transposed convolution with stride 2: exact 2x upsampling, every
/// output pixel receives exactly one kernel tap.
struct TConv2x2 {
    int cin = 0, cout = 0;
    std::vector<double> weight, wgrad;  // [cout][cin][2][2]
    std::vector<double> bias, bgrad;
    Tensor4 input;

    TConv2x2() = default;
    TConv2x2(int cin_, int cout_, Rng& rng) : cin(cin_), cout(cout_) {
        weight.resize(static_cast<std::size_t>(cout) * cin * 4);
        wgrad.resize(weight.size(), 0.0);
        bias.resize(cout);
        bgrad.resize(cout, 0.0);
        double bound = 1.0 / std::sqrt(static_cast<double>(cin) * 4);
        for (auto& v : weight) v = rng.uniform(-bound, bound);
        for (auto& v : bias) v = rng.uniform(-bound, bound);
    }

    double wat(int co, int ci, int u, int v) const {
        return weight[((static_cast<std::size_t>(co) * cin + ci) * 2 + u) * 2 + v];
    }

    Tensor4 forward(const Tensor4& x) {
        if (x.c != cin) throw value_error("TConv2x2: channel mismatch");
        input = x;
        Tensor4 y(x.n, cout, x.h * 2, x.w * 2);
        for (int in = 0; in < x.n; ++in)
            for (int co = 0; co < cout; ++co) {
                double* yp = y.plane(in, co);
                for (std::size_t i = 0; i < static_cast<std::size_t>(y.h) * y.w; ++i)
                    yp[i] = bias[co];
                for (int ci = 0; ci < cin; ++ci) {
                    const double* xp = x.plane(in, ci);
                    for (int yy = 0; yy < x.h; ++yy)
                        for (int xx = 0; xx < x.w; ++xx) {
                            const double xv = xp[static_cast<std::size_t>(yy) * x.w + xx];
                            for (int u = 0; u < 2; ++u)
                                for (int v = 0; v < 2; ++v)
                                    yp[static_cast<std::size_t>(2 * yy + u) * y.w + 2 * xx + v] +=
                                        wat(co, ci, u, v) * xv;
                        }
                }
            }
        return y;
    }

    Tensor4 backward(const Tensor4& gy) {
        const Tensor4& x = input;
        Tensor4 gx(x.n, cin, x.h, x.w);
        for (int in = 0; in < x.n; ++in)
            for (int co = 0; co < cout; ++co) {
                const double* gp = gy.plane(in, co);
                double bsum = 0.0;
                for (std::size_t i = 0; i < static_cast<std::size_t>(gy.h) * gy.w; ++i)
                    bsum += gp[i];
                bgrad[co] += bsum;
                for (int ci = 0; ci < cin; ++ci) {
                    const double* xp = x.plane(in, ci);
                    double* gxp = gx.plane(in, ci);
                    for (int u = 0; u < 2; ++u)
                        for (int v = 0; v < 2; ++v) {
                            double wsum = 0.0;
                            const double wv = wat(co, ci, u, v);
                            for (int yy = 0; yy < x.h; ++yy)
                                for (int xx = 0; xx < x.w; ++xx) {
                                    const double g =
                                        gp[static_cast<std::size_t>(2 * yy + u) * gy.w + 2 * xx +
                                           v];
                                    wsum += g * xp[static_cast<std::size_t>(yy) * x.w + xx];
                                    gxp[static_cast<std::size_t>(yy) * x.w + xx] += wv * g;
                                }
                            wgrad[((static_cast<std::size_t>(co) * cin + ci) * 2 + u) * 2 + v] +=
                                wsum;
                        }
                }
            }
        return gx;
    }

    void collect(std::vector<ParamRef>& out) {
        out.push_back({weight.data(), wgrad.data(), weight.size()});
        out.push_back({bias.data(), bgrad.data(), bias.size()});
    }
};

struct Relu {
    Tensor4 input;
    Tensor4 forward(const Tensor4& x) {
        input = x;
        Tensor4 y = x;
        for (double& v : y.data) v = v > 0.0 ? v : 0.0;
        return y;
    }
    Tensor4 backward(const Tensor4& gy) {
        Tensor4 gx = gy;
        for (std::size_t i = 0; i < gx.data.size(); ++i)
            if (input.data[i] <= 0.0) gx.data[i] = 0.0;
        return gx;
    }
};

struct Sigmoid {
    Tensor4 output;
    Tensor4 forward(const Tensor4& x) {
        Tensor4 y = x;
        for (double& v : y.data) v = 1.0 / (1.0 + std::exp(-v));
        output = y;
        return y;
    }
    Tensor4 backward(const Tensor4& gy) {
        Tensor4 gx = gy;
        for (std::size_t i = 0; i < gx.data.size(); ++i) {
            double s = output.data[i];
            gx.data[i] *= s * (1.0 - s);
        }
        return gx;
    }
};

/// 2x2 max pooling, stride 2. Ties resolve to the first element in scan
/// order, matching the cached argmax used by backward.
struct MaxPool2 {
    Tensor4 argmax;  // flat input index per output pixel, stored as double
    int in_h = 0, in_w = 0;

    Tensor4 forward(const Tensor4& x) {
        if (x.h % 2 || x.w % 2) throw value_error("MaxPool2: odd spatial dims");
        in_h = x.h;
        in_w = x.w;
        Tensor4 y(x.n, x.c, x.h / 2, x.w / 2);
        argmax = Tensor4(x.n, x.c, y.h, y.w);
        for (int in = 0; in < x.n; ++in)
            for (int ic = 0; ic < x.c; ++ic) {
                const double* xp = x.plane(in, ic);
                double* yp = y.plane(in, ic);
                double* ap = argmax.plane(in, ic);
                for (int yy = 0; yy < y.h; ++yy)
                    for (int xx = 0; xx < y.w; ++xx) {
                        std::size_t best = static_cast<std::size_t>(2 * yy) * x.w + 2 * xx;
                        double bv = xp[best];
                        for (int u = 0; u < 2; ++u)
                            for (int v = 0; v < 2; ++v) {
                                std::size_t idx =
                                    static_cast<std::size_t>(2 * yy + u) * x.w + 2 * xx + v;
                                if (xp[idx] > bv) {
                                    bv = xp[idx];
                                    best = idx;
                                }
                            }
                        yp[static_cast<std::size_t>(yy) * y.w + xx] = bv;
                        ap[static_cast<std::size_t>(yy) * y.w + xx] =
                            static_cast<double>(best);
                    }
            }
        return y;
    }

    Tensor4 backward(const Tensor4& gy) {
        Tensor4 gx(gy.n, gy.c, in_h, in_w);
        for (int in = 0; in < gy.n; ++in)
            for (int ic = 0; ic < gy.c; ++ic) {
                const double* gp = gy.plane(in, ic);
                const double* ap = argmax.plane(in, ic);
                double* gxp = gx.plane(in, ic);
                for (std::size_t i = 0; i < static_cast<std::size_t>(gy.h) * gy.w; ++i)
                    gxp[static_cast<std::size_t>(ap[i])] += gp[i];
            }
        return gx;
    }
};

/// Per-channel batch normalization over (N, H, W). Training uses batch
/// statistics (biased variance) and maintains running averages for inference.
struct BatchNorm {
    int channels = 0;
    double eps = 1e-5, momentum = 0.1;
    std::vector<double> gamma, ggrad, beta, bgrad;
    std::vector<double> running_mean, running_var;

    // forward cache
    Tensor4 xhat;
    std::vector<double> batch_mean, batch_inv_std;
    bool cached_training = false;

    BatchNorm() = default;
    explicit BatchNorm(int c)
        : channels(c), gamma(c, 1.0), ggrad(c, 0.0), beta(c, 0.0), bgrad(c, 0.0),
          running_mean(c, 0.0), running_var(c, 1.0) {}

    Tensor4 forward(const Tensor4& x, bool training) {
        if (x.c != channels) throw value_error("BatchNorm: channel mismatch");
        Tensor4 y(x.n, x.c, x.h, x.w);
        const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
        const double count = static_cast<double>(x.n) * plane;
        cached_training = training;
        if (training) {
            xhat = Tensor4(x.n, x.c, x.h, x.w);
            batch_mean.assign(channels, 0.0);
            batch_inv_std.assign(channels, 0.0);
            for (int ic = 0; ic < channels; ++ic) {
                double mean = 0.0;
                for (int in = 0; in < x.n; ++in) {
                    const double* xp = x.plane(in, ic);
                    for (std::size_t i = 0; i < plane; ++i) mean += xp[i];
                }
                mean /= count;
                double var = 0.0;
                for (int in = 0; in < x.n; ++in) {
                    const double* xp = x.plane(in, ic);
                    for (std::size_t i = 0; i < plane; ++i)
                        var += (xp[i] - mean) * (xp[i] - mean);
                }
                var /= count;  // biased
                double inv = 1.0 / std::sqrt(var + eps);
                batch_mean[ic] = mean;
                batch_inv_std[ic] = inv;
                running_mean[ic] = (1.0 - momentum) * running_mean[ic] + momentum * mean;
                running_var[ic] = (1.0 - momentum) * running_var[ic] + momentum * var;
                for (int in = 0; in < x.n; ++in) {
                    const double* xp = x.plane(in, ic);
                    double* hp = xhat.plane(in, ic);
                    double* yp = y.plane(in, ic);
                    for (std::size_t i = 0; i < plane; ++i) {
                        hp[i] = (xp[i] - mean) * inv;
                        yp[i] = gamma[ic] * hp[i] + beta[ic];
                    }
                }
            }
        } else {
            for (int ic = 0; ic < channels; ++ic) {
                double inv = 1.0 / std::sqrt(running_var[ic] + eps);
                for (int in = 0; in < x.n; ++in) {
                    const double* xp = x.plane(in, ic);
                    double* yp = y.plane(in, ic);
                    for (std::size_t i = 0; i < plane; ++i)
                        yp[i] = gamma[ic] * (xp[i] - running_mean[ic]) * inv + beta[ic];
                }
            }
        }
        return y;
    }

    Tensor4 backward(const Tensor4& gy) {
        if (!cached_training)
            throw value_error("BatchNorm: backward requires a training-mode forward");
        Tensor4 gx(gy.n, gy.c, gy.h, gy.w);
        const std::size_t plane = static_cast<std::size_t>(gy.h) * gy.w;
        const double count = static_cast<double>(gy.n) * plane;
        for (int ic = 0; ic < channels; ++ic) {
            double sum_g = 0.0, sum_gh = 0.0;
            for (int in = 0; in < gy.n; ++in) {
                const double* gp = gy.plane(in, ic);
                const double* hp = xhat.plane(in, ic);
                for (std::size_t i = 0; i < plane; ++i) {
                    sum_g += gp[i];
                    sum_gh += gp[i] * hp[i];
                }
            }
            ggrad[ic] += sum_gh;
            bgrad[ic] += sum_g;
            const double scale = gamma[ic] * batch_inv_std[ic];
            for (int in = 0; in < gy.n; ++in) {
                const double* gp = gy.plane(in, ic);
                const double* hp = xhat.plane(in, ic);
                double* gxp = gx.plane(in, ic);
                for (std::size_t i = 0; i < plane; ++i)
                    gxp[i] = scale * (gp[i] - sum_g / count - hp[i] * sum_gh / count);
            }
        }
        return gx;
    }

    void collect(std::vector<ParamRef>& out) {
        out.push_back({gamma.data(), ggrad.data(), gamma.size()});
        out.push_back({beta.data(), bgrad.data(), beta.size()});
    }
    void collect_buffers(std::vector<BufferRef>& out) {
        out.push_back({running_mean.data(), running_mean.size()});
        out.push_back({running_var.data(), running_var.size()});
    }
};

}  // namespace vmorph::nn
