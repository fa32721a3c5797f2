#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "vmorph/metrics.hpp"
#include "vmorph/nn/adam.hpp"
#include "vmorph/nn/augment.hpp"
#include "vmorph/nn/unet.hpp"

namespace vmorph::nn {

struct TrainSample {
    Slice2D image;   // windowed to [0,1]
    Slice2D gt;      // binary
    AllowMask allow;
    int patient_id = 0;
};

enum class LossMode { anatomy_aware, baseline };

inline const char* to_string(LossMode m) {
    return m == LossMode::anatomy_aware ? "anatomy-aware" : "baseline";
}

struct TrainConfig {
    double lr = 1e-4;
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    int batch_size = 3;
    int max_epochs = 200;
    int patience = 25;
    LossMode loss_mode = LossMode::anatomy_aware;
    MaskedLossConfig loss;
    bool augment_enabled = true;
    AugmentConfig augment;
    std::uint64_t seed = 1;

    void validate() const {
        if (!(lr > 0)) throw config_error("TrainConfig: lr must be > 0");
        if (batch_size < 1) throw config_error("TrainConfig: batch_size must be >= 1");
        if (max_epochs < 1) throw config_error("TrainConfig: max_epochs must be >= 1");
        if (patience < 1) throw config_error("TrainConfig: patience must be >= 1");
    }

    MaskedLossConfig effective_loss() const {
        MaskedLossConfig c = loss;
        if (loss_mode == LossMode::baseline) {
            c.bce_weight = 0.0;     // plain Dice objective
            c.baseline_mode = true; // every pixel contributes
        }
        return c;
    }
};

struct EpochRow {
    int epoch = 0;
    double train_loss = 0.0;
    double val_dice = 0.0;
};

struct TrainResult {
    UNetConfig net_cfg;
    std::vector<double> best_state;  // parameters + buffers at the best epoch
    std::vector<EpochRow> history;
    int best_epoch = 0;
    double best_val_dice = 0.0;
};

/// Strict-improvement early stopping on validation Dice.
struct EarlyStopper {
    int patience = 25;
    double best = -1.0;
    int best_epoch = 0;
    int since_best = 0;

    explicit EarlyStopper(int patience_) : patience(patience_) {}

    bool observe(int epoch, double score) {
        if (score > best) {
            best = score;
            best_epoch = epoch;
            since_best = 0;
            return true;
        }
        ++since_best;
        return false;
    }
    bool should_stop() const { return since_best >= patience; }
};

namespace detail {

inline SliceTensor plane_to_slice(const Tensor4& t, int sample) {
    SliceTensor s(t.h, t.w);
    std::copy_n(t.plane(sample, 0), s.size(), s.data.begin());
    return s;
}

}  // namespace detail

/// Mean Dice over slices whose ground truth is nonempty; 0 when no slice
/// qualifies. Inference mode, batched.
inline double validation_dice(UNet& net, const std::vector<TrainSample>& samples,
                              int batch_size = 8, double threshold = 0.5) {
    double sum = 0.0;
    int count = 0;
    for (std::size_t start = 0; start < samples.size();
         start += static_cast<std::size_t>(batch_size)) {
        std::size_t n = std::min(samples.size() - start, static_cast<std::size_t>(batch_size));
        const auto& first = samples[start].image;
        Tensor4 x(static_cast<int>(n), 1, first.height, first.width);
        for (std::size_t i = 0; i < n; ++i)
            std::copy_n(samples[start + i].image.data.data(), x.data.size() / n,
                        x.plane(static_cast<int>(i), 0));
        Tensor4 prob = net.forward(x, false);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& s = samples[start + i];
            SliceTensor pred = detail::plane_to_slice(prob, static_cast<int>(i));
            SliceTensor gts(s.gt.height, s.gt.width);
            gts.data = s.gt.data;
            auto c = count_slice(binarize(pred, threshold), gts);
            if (c.gt_positives() > 0) {
                sum += dice_score(c).value_or(0.0);
                ++count;
            }
        }
    }
    return count ? sum / count : 0.0;
}

inline TrainResult train(const UNetConfig& net_cfg, const TrainConfig& cfg,
                         const std::vector<TrainSample>& train_set,
                         const std::vector<TrainSample>& val_set) {
    cfg.validate();
    net_cfg.validate();
    if (train_set.empty()) throw config_error("train: empty training set");
    if (val_set.empty()) throw config_error("train: empty validation set");
    const int H = train_set.front().image.height, W = train_set.front().image.width;
    auto check_shape = [&](const TrainSample& s) {
        if (s.image.height != H || s.image.width != W || s.gt.height != H || s.gt.width != W ||
            s.allow.height != H || s.allow.width != W)
            throw config_error("train: all samples must share one slice shape");
    };
    for (const auto& s : train_set) check_shape(s);
    for (const auto& s : val_set) check_shape(s);

    UNet net(net_cfg);
    Adam opt(net.parameter_count(), cfg.lr);
    opt.beta1 = cfg.beta1;
    opt.beta2 = cfg.beta2;
    opt.eps = cfg.adam_eps;
    const MaskedLossConfig loss_cfg = cfg.effective_loss();

    TrainResult result;
    result.net_cfg = net_cfg;
    EarlyStopper stopper(cfg.patience);

    std::vector<int> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        Rng shuffle_rng = Rng::derive(cfg.seed, 0x5f5f, epoch);
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            std::size_t n =
                std::min(order.size() - start, static_cast<std::size_t>(cfg.batch_size));
            const auto& shape = train_set[order[start]].image;
            Tensor4 x(static_cast<int>(n), 1, shape.height, shape.width);
            std::vector<SliceTensor> targets(n);
            std::vector<AllowMask> allows(n);
            for (std::size_t i = 0; i < n; ++i) {
                const TrainSample& s = train_set[order[start + i]];
                Slice2D img = s.image, gt = s.gt;
                AllowMask allow = s.allow;
                if (cfg.augment_enabled) {
                    Rng arng = Rng::derive(cfg.seed, static_cast<std::uint64_t>(order[start + i]),
                                           static_cast<std::uint64_t>(epoch));
                    augment_pair(img, gt, allow, sample_augment_params(cfg.augment, arng));
                }
                std::copy_n(img.data.data(), img.data.size(), x.plane(static_cast<int>(i), 0));
                targets[i].height = gt.height;
                targets[i].width = gt.width;
                targets[i].data = std::move(gt.data);
                allows[i] = std::move(allow);
            }

            Tensor4 prob = net.forward(x, true);
            Tensor4 gradp(prob.n, 1, prob.h, prob.w);
            double batch_loss = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                SliceTensor pred = detail::plane_to_slice(prob, static_cast<int>(i));
                batch_loss += masked_combined_loss(pred, targets[i], allows[i], loss_cfg);
                SliceTensor g =
                    masked_combined_loss_grad(pred, targets[i], allows[i], loss_cfg);
                double* gp = gradp.plane(static_cast<int>(i), 0);
                for (std::size_t k = 0; k < g.size(); ++k) gp[k] = g.data[k] / n;
            }
            batch_loss /= n;
            net.zero_grad();
            net.backward(gradp);
            opt.step(net.parameters());
            epoch_loss += batch_loss * n;
            seen += n;
        }

        double val_dice = validation_dice(net, val_set);
        result.history.push_back({epoch, epoch_loss / seen, val_dice});

        if (stopper.observe(epoch, val_dice)) result.best_state = net.state_flat();
        if (stopper.should_stop()) break;
    }
    result.best_epoch = stopper.best_epoch;
    result.best_val_dice = stopper.best;
    return result;
}

/// Checkpoint: 8-byte magic, LE u32 config-text length, config text,
/// LE u64 value count, LE float64 state blob.
inline constexpr char kCheckpointMagic[8] = {'V', 'M', 'U', 'N', 'E', 'T', '1', '\n'};

inline std::string unet_config_echo(const UNetConfig& c) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "levels=%d\nbase_channels=%d\nuse_batchnorm=%d\nseed=%llu\n",
                  c.levels, c.base_channels, c.use_batchnorm ? 1 : 0,
                  static_cast<unsigned long long>(c.seed));
    return buf;
}

inline UNetConfig parse_unet_config_echo(const std::string& text) {
    UNetConfig c;
    unsigned long long seed = 0;
    int bn = 0;
    if (std::sscanf(text.c_str(), "levels=%d\nbase_channels=%d\nuse_batchnorm=%d\nseed=%llu\n",
                    &c.levels, &c.base_channels, &bn, &seed) != 4)
        throw format_error("checkpoint: malformed config echo");
    c.use_batchnorm = bn != 0;
    c.seed = seed;
    return c;
}

inline void save_checkpoint(const UNetConfig& cfg, const std::vector<double>& state,
                            const std::string& path) {
    static_assert(sizeof(double) == 8);
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw io_error("save_checkpoint: cannot open " + path);
    std::fwrite(kCheckpointMagic, 1, 8, f);
    std::string echo = unet_config_echo(cfg);
    std::uint32_t len = static_cast<std::uint32_t>(echo.size());
    std::fwrite(&len, 4, 1, f);
    std::fwrite(echo.data(), 1, echo.size(), f);
    std::uint64_t count = state.size();
    std::fwrite(&count, 8, 1, f);
    if (std::fwrite(state.data(), 8, state.size(), f) != state.size()) {
        std::fclose(f);
        throw io_error("save_checkpoint: short write to " + path);
    }
    std::fclose(f);
}

inline UNet load_checkpoint(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw io_error("load_checkpoint: cannot open " + path);
    char magic[8];
    if (std::fread(magic, 1, 8, f) != 8 || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
        std::fclose(f);
        throw format_error("load_checkpoint: bad magic in " + path);
    }
    std::uint32_t len = 0;
    if (std::fread(&len, 4, 1, f) != 1 || len > 4096) {
        std::fclose(f);
        throw format_error("load_checkpoint: bad config length");
    }
    std::string echo(len, '\0');
    if (std::fread(echo.data(), 1, len, f) != len) {
        std::fclose(f);
        throw io_error("load_checkpoint: truncated config echo");
    }
    std::uint64_t count = 0;
    if (std::fread(&count, 8, 1, f) != 1) {
        std::fclose(f);
        throw io_error("load_checkpoint: truncated header");
    }
    std::vector<double> state(count);
    if (std::fread(state.data(), 8, count, f) != count) {
        std::fclose(f);
        throw io_error("load_checkpoint: truncated state blob");
    }
    std::fclose(f);
    UNet net(parse_unet_config_echo(echo));
    net.load_state_flat(state);
    return net;
}

inline void write_history(const std::vector<EpochRow>& rows, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw io_error("write_history: cannot open " + path);
    std::fprintf(f, "epoch,train_loss,val_dice\n");
    for (const auto& r : rows)
        std::fprintf(f, "%d,%.17g,%.17g\n", r.epoch, r.train_loss, r.val_dice);
    std::fclose(f);
}

inline std::vector<EpochRow> read_history(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "r");
    if (!f) throw io_error("read_history: cannot open " + path);
    std::vector<EpochRow> rows;
    char line[256];
    if (!std::fgets(line, sizeof(line), f) ||
        std::strcmp(line, "epoch,train_loss,val_dice\n") != 0) {
        std::fclose(f);
        throw format_error("read_history: missing header in " + path);
    }
    while (std::fgets(line, sizeof(line), f)) {
        EpochRow r;
        if (std::sscanf(line, "%d,%lf,%lf", &r.epoch, &r.train_loss, &r.val_dice) == 3)
            rows.push_back(r);
    }
    std::fclose(f);
    return rows;
}

}  // namespace vmorph::nn
