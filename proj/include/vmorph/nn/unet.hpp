#pragma once

#include <string>
#include <vector>

#include "vmorph/nn/layers.hpp"

namespace vmorph::nn {

struct UNetConfig {
    int levels = 3;         // number of 2x poolings
    int base_channels = 8;  // channels after the first block; doubles per level
    bool use_batchnorm = true;
    std::uint64_t seed = 1;

    void validate() const {
        if (levels < 1) throw config_error("UNetConfig: levels must be >= 1");
        if (base_channels < 1) throw config_error("UNetConfig: base_channels must be >= 1");
    }
};

/// conv-(bn)-relu twice
struct ConvBlock {
    Conv3x3 conv1, conv2;
    BatchNorm bn1, bn2;
    Relu relu1, relu2;
    bool use_bn = true;

    ConvBlock() = default;
    ConvBlock(int cin, int cout, bool bn, Rng& rng)
        : conv1(cin, cout, rng), conv2(cout, cout, rng), use_bn(bn) {
        if (bn) {
            bn1 = BatchNorm(cout);
            bn2 = BatchNorm(cout);
        }
    }

    Tensor4 forward(const Tensor4& x, bool training) {
        Tensor4 t = conv1.forward(x);
        if (use_bn) t = bn1.forward(t, training);
        t = relu1.forward(t);
        t = conv2.forward(t);
        if (use_bn) t = bn2.forward(t, training);
        return relu2.forward(t);
    }

    Tensor4 backward(const Tensor4& gy) {
        Tensor4 g = relu2.backward(gy);
        if (use_bn) g = bn2.backward(g);
        g = conv2.backward(g);
        g = relu1.backward(g);
        if (use_bn) g = bn1.backward(g);
        return conv1.backward(g);
    }

    void collect(std::vector<ParamRef>& out) {
        conv1.collect(out);
        if (use_bn) bn1.collect(out);
        conv2.collect(out);
        if (use_bn) bn2.collect(out);
    }
    void collect_buffers(std::vector<BufferRef>& out) {
        if (use_bn) {
            bn1.collect_buffers(out);
            bn2.collect_buffers(out);
        }
    }
};

/// Symmetric encoder/decoder with skip connections and a sigmoid head.
/// Input H and W must be divisible by 2^levels.
struct UNet {
    UNetConfig cfg;
    std::vector<ConvBlock> enc;
    std::vector<MaxPool2> pools;
    ConvBlock bottleneck;
    std::vector<TConv2x2> ups;     // index k upsamples into level k
    std::vector<ConvBlock> dec;
    Conv1x1 head;
    Sigmoid out_act;

    // forward caches
    std::vector<Tensor4> skips;

    UNet() = default;
    explicit UNet(const UNetConfig& c) : cfg(c) {
        cfg.validate();
        Rng rng(cfg.seed);
        int ch_in = 1;
        for (int k = 0; k < cfg.levels; ++k) {
            int ch = cfg.base_channels << k;
            enc.emplace_back(ch_in, ch, cfg.use_batchnorm, rng);
            ch_in = ch;
        }
        pools.resize(cfg.levels);
        bottleneck = ConvBlock(ch_in, cfg.base_channels << cfg.levels, cfg.use_batchnorm, rng);
        ups.resize(cfg.levels);
        dec.resize(cfg.levels);
        for (int k = cfg.levels - 1; k >= 0; --k) {
            int ch = cfg.base_channels << k;
            ups[k] = TConv2x2(ch * 2, ch, rng);
            dec[k] = ConvBlock(ch * 2, ch, cfg.use_batchnorm, rng);
        }
        head = Conv1x1(cfg.base_channels, 1, rng);
    }

    void check_input(const Tensor4& x) const {
        if (x.c != 1) throw value_error("UNet: expected a single input channel");
        int div = 1 << cfg.levels;
        if (x.h % div || x.w % div)
            throw value_error("UNet: spatial dims " + std::to_string(x.h) + "x" +
                              std::to_string(x.w) + " not divisible by " + std::to_string(div));
    }

    Tensor4 forward(const Tensor4& x, bool training) {
        check_input(x);
        skips.assign(cfg.levels, Tensor4());
        Tensor4 t = x;
        for (int k = 0; k < cfg.levels; ++k) {
            skips[k] = enc[k].forward(t, training);
            t = pools[k].forward(skips[k]);
        }
        t = bottleneck.forward(t, training);
        for (int k = cfg.levels - 1; k >= 0; --k) {
            Tensor4 up = ups[k].forward(t);
            t = dec[k].forward(concat_channels(up, skips[k]), training);
        }
        return out_act.forward(head.forward(t));
    }

    /// Gradient of the loss with respect to the input image, for a batch whose
    /// forward pass was just run in training mode. grad_prob is dL/d(output).
    Tensor4 backward(const Tensor4& grad_prob) {
        Tensor4 g = head.backward(out_act.backward(grad_prob));
        std::vector<Tensor4> skip_grads(cfg.levels);
        for (int k = 0; k < cfg.levels; ++k) {
            Tensor4 gj = dec[k].backward(g);
            Tensor4 gup(gj.n, gj.c / 2, gj.h, gj.w);
            skip_grads[k] = Tensor4(gj.n, gj.c / 2, gj.h, gj.w);
            split_channels(gj, gup, skip_grads[k]);
            g = ups[k].backward(gup);
        }
        g = bottleneck.backward(g);
        for (int k = cfg.levels - 1; k >= 0; --k) {
            Tensor4 ge = pools[k].backward(g);
            for (std::size_t i = 0; i < ge.data.size(); ++i)
                ge.data[i] += skip_grads[k].data[i];
            g = enc[k].backward(ge);
        }
        return g;
    }

    std::vector<ParamRef> parameters() {
        std::vector<ParamRef> out;
        for (auto& b : enc) b.collect(out);
        bottleneck.collect(out);
        for (int k = cfg.levels - 1; k >= 0; --k) {
            ups[k].collect(out);
            dec[k].collect(out);
        }
        head.collect(out);
        return out;
    }

    std::vector<BufferRef> buffers() {
        std::vector<BufferRef> out;
        for (auto& b : enc) b.collect_buffers(out);
        bottleneck.collect_buffers(out);
        for (int k = cfg.levels - 1; k >= 0; --k) dec[k].collect_buffers(out);
        return out;
    }

    std::size_t parameter_count() {
        std::size_t n = 0;
        for (const auto& p : parameters()) n += p.size;
        return n;
    }

    void zero_grad() {
        for (auto& p : parameters()) std::fill(p.grad, p.grad + p.size, 0.0);
    }

    std::vector<double> state_flat() {
        std::vector<double> out;
        for (const auto& p : parameters()) out.insert(out.end(), p.value, p.value + p.size);
        for (const auto& b : buffers()) out.insert(out.end(), b.value, b.value + b.size);
        return out;
    }

    void load_state_flat(const std::vector<double>& flat) {
        std::size_t need = 0;
        for (const auto& p : parameters()) need += p.size;
        for (const auto& b : buffers()) need += b.size;
        if (flat.size() != need)
            throw value_error("UNet: state blob holds " + std::to_string(flat.size()) +
                              " values, expected " + std::to_string(need));
        std::size_t off = 0;
        for (auto& p : parameters()) {
            std::copy_n(flat.data() + off, p.size, p.value);
            off += p.size;
        }
        for (auto& b : buffers()) {
            std::copy_n(flat.data() + off, b.size, b.value);
            off += b.size;
        }
    }
};

}  // namespace vmorph::nn
