#pragma once

#include <charconv>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "vmorph/centerline/fast_march.hpp"
#include "vmorph/mesh/recon.hpp"
#include "vmorph/nn/train.hpp"
#include "vmorph/phantom.hpp"

namespace vmorph {

/// Everything a run needs, with defaults chosen so an empty config file is a
/// complete experiment description.
struct ExperimentConfig {
    // [io]
    double window_lo_hu = -150.0;
    double window_hi_hu = 600.0;
    double target_spacing_mm = 1.0;

    nn::UNetConfig net;     // [unet]
    nn::TrainConfig train;  // [train]; loss under [loss], augment under [augment]
    PhantomSpec phantom;    // [phantom]; per-phantom jitter comes from [experiment] seed

    // [experiment]
    int n_phantoms = 15;
    int n_train = 10;
    int n_val = 2;
    int n_test = 3;
    int slice_stride = 4;
    int crop_px = 64;
    int min_aorta_voxels = 1;
    int distractors_per_phantom = 4;
    int soft_tissue_per_phantom = 2;
    std::uint64_t seed = 1;

    ReconOptions recon;  // [recon]
    FmmOptions fmm;      // [centerline]
    int tangent_window = 2;

    void validate() const {
        if (!(window_hi_hu > window_lo_hu))
            throw config_error("config: io.window_hi_hu must exceed io.window_lo_hu");
        if (!(target_spacing_mm > 0))
            throw config_error("config: io.target_spacing_mm must be > 0");
        net.validate();
        train.validate();
        phantom.validate();
        if (n_phantoms < 1) throw config_error("config: experiment.phantoms must be >= 1");
        if (n_train < 0 || n_val < 0 || n_test < 0 || n_train + n_val + n_test != n_phantoms)
            throw config_error("config: split sizes must be nonnegative and sum to phantoms");
        if (slice_stride < 1) throw config_error("config: experiment.slice_stride must be >= 1");
        if (crop_px < 16 || crop_px > phantom.nx || crop_px > phantom.ny)
            throw config_error("config: experiment.crop_px must be in [16, phantom dims]");
        if (min_aorta_voxels < 1)
            throw config_error("config: experiment.min_aorta_voxels must be >= 1");
        if (distractors_per_phantom < 0 || soft_tissue_per_phantom < 0)
            throw config_error("config: organ counts must be >= 0");
        if (recon.gaussian_sigma < 0) throw config_error("config: recon.gaussian_sigma must be >= 0");
        if (!(recon.iso > 0)) throw config_error("config: recon.iso must be > 0");
        if (recon.laplacian_iterations < 0 || recon.taubin_iterations < 0)
            throw config_error("config: smoothing iteration counts must be >= 0");
        if (recon.laplacian_iterations > 0 &&
            (recon.laplacian_lambda <= 0 || recon.laplacian_lambda > 1))
            throw config_error("config: recon.laplacian_lambda must be in (0, 1]");
        if (recon.taubin_iterations > 0 &&
            (recon.taubin_lambda <= 0 || recon.taubin_mu >= 0 ||
             -recon.taubin_mu <= recon.taubin_lambda))
            throw config_error("config: taubin needs lambda > 0 > mu with |mu| > lambda");
        if (!(fmm.eps_d_mm > 0)) throw config_error("config: centerline.eps_d_mm must be > 0");
        if (fmm.exponent < 0) throw config_error("config: centerline.exponent must be >= 0");
        if (!(fmm.step_factor > 0) || fmm.step_factor > 1)
            throw config_error("config: centerline.step_factor must be in (0, 1]");
        if (tangent_window < 0) throw config_error("config: centerline.tangent_window must be >= 0");
    }
};

namespace detail {

struct ConfigField {
    std::string name;  // section.key
    std::function<void(ExperimentConfig&, const std::string&, int)> parse;
    std::function<std::string(const ExperimentConfig&)> print;
};

inline std::string print_f64(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

template <class T>
void parse_number(const std::string& raw, const std::string& name, int line, T& out) {
    const char* b = raw.data();
    const char* e = raw.data() + raw.size();
    auto r = std::from_chars(b, e, out);
    if (r.ec != std::errc{} || r.ptr != e)
        throw config_error("config line " + std::to_string(line) + ": value '" + raw +
                           "' is not a valid number for key " + name);
}

inline const std::vector<ConfigField>& config_fields() {
    using EC = ExperimentConfig;
    static const std::vector<ConfigField> fields = [] {
        std::vector<ConfigField> f;
        auto real = [&](const char* name, std::function<double&(EC&)> get) {
            f.push_back({name,
                         [name, get](EC& c, const std::string& raw, int line) {
                             parse_number(raw, name, line, get(c));
                         },
                         [get](const EC& c) { return print_f64(get(const_cast<EC&>(c))); }});
        };
        auto integer = [&](const char* name, std::function<int&(EC&)> get) {
            f.push_back({name,
                         [name, get](EC& c, const std::string& raw, int line) {
                             parse_number(raw, name, line, get(c));
                         },
                         [get](const EC& c) {
                             return std::to_string(get(const_cast<EC&>(c)));
                         }});
        };
        auto uinteger = [&](const char* name, std::function<std::uint64_t&(EC&)> get) {
            f.push_back({name,
                         [name, get](EC& c, const std::string& raw, int line) {
                             parse_number(raw, name, line, get(c));
                         },
                         [get](const EC& c) {
                             return std::to_string(get(const_cast<EC&>(c)));
                         }});
        };
        auto boolean = [&](const char* name, std::function<bool&(EC&)> get) {
            f.push_back({name,
                         [name, get](EC& c, const std::string& raw, int line) {
                             if (raw == "1" || raw == "true") get(c) = true;
                             else if (raw == "0" || raw == "false") get(c) = false;
                             else
                                 throw config_error("config line " + std::to_string(line) +
                                                    ": value '" + raw +
                                                    "' is not a boolean for key " + name);
                         },
                         [get](const EC& c) {
                             return std::string(get(const_cast<EC&>(c)) ? "1" : "0");
                         }});
        };

        real("io.window_lo_hu", [](EC& c) -> double& { return c.window_lo_hu; });
        real("io.window_hi_hu", [](EC& c) -> double& { return c.window_hi_hu; });
        real("io.target_spacing_mm", [](EC& c) -> double& { return c.target_spacing_mm; });

        real("loss.bce_weight", [](EC& c) -> double& { return c.train.loss.bce_weight; });
        real("loss.epsilon", [](EC& c) -> double& { return c.train.loss.epsilon; });
        real("loss.prob_clamp", [](EC& c) -> double& { return c.train.loss.prob_clamp; });

        integer("unet.levels", [](EC& c) -> int& { return c.net.levels; });
        integer("unet.base_channels", [](EC& c) -> int& { return c.net.base_channels; });
        boolean("unet.use_batchnorm", [](EC& c) -> bool& { return c.net.use_batchnorm; });
        uinteger("unet.seed", [](EC& c) -> std::uint64_t& { return c.net.seed; });

        real("train.lr", [](EC& c) -> double& { return c.train.lr; });
        real("train.beta1", [](EC& c) -> double& { return c.train.beta1; });
        real("train.beta2", [](EC& c) -> double& { return c.train.beta2; });
        real("train.adam_eps", [](EC& c) -> double& { return c.train.adam_eps; });
        integer("train.batch_size", [](EC& c) -> int& { return c.train.batch_size; });
        integer("train.max_epochs", [](EC& c) -> int& { return c.train.max_epochs; });
        integer("train.patience", [](EC& c) -> int& { return c.train.patience; });
        boolean("train.augment_enabled", [](EC& c) -> bool& { return c.train.augment_enabled; });
        uinteger("train.seed", [](EC& c) -> std::uint64_t& { return c.train.seed; });
        f.push_back({"train.loss_mode",
                     [](EC& c, const std::string& raw, int line) {
                         if (raw == "anatomy-aware") c.train.loss_mode = nn::LossMode::anatomy_aware;
                         else if (raw == "baseline") c.train.loss_mode = nn::LossMode::baseline;
                         else
                             throw config_error("config line " + std::to_string(line) +
                                                ": train.loss_mode must be 'anatomy-aware' or "
                                                "'baseline', got '" + raw + "'");
                     },
                     [](const EC& c) { return std::string(nn::to_string(c.train.loss_mode)); }});

        real("augment.max_rotate_deg", [](EC& c) -> double& { return c.train.augment.max_rotate_deg; });
        real("augment.max_translate_px",
             [](EC& c) -> double& { return c.train.augment.max_translate_px; });
        real("augment.scale_lo", [](EC& c) -> double& { return c.train.augment.scale_lo; });
        real("augment.scale_hi", [](EC& c) -> double& { return c.train.augment.scale_hi; });
        real("augment.flip_prob", [](EC& c) -> double& { return c.train.augment.flip_prob; });
        real("augment.intensity_lo", [](EC& c) -> double& { return c.train.augment.intensity_lo; });
        real("augment.intensity_hi", [](EC& c) -> double& { return c.train.augment.intensity_hi; });
        real("augment.noise_sigma", [](EC& c) -> double& { return c.train.augment.noise_sigma; });
        real("augment.elastic_max_px", [](EC& c) -> double& { return c.train.augment.elastic_max_px; });
        real("augment.elastic_prob", [](EC& c) -> double& { return c.train.augment.elastic_prob; });

        integer("phantom.nx", [](EC& c) -> int& { return c.phantom.nx; });
        integer("phantom.ny", [](EC& c) -> int& { return c.phantom.ny; });
        integer("phantom.nz", [](EC& c) -> int& { return c.phantom.nz; });
        real("phantom.sx", [](EC& c) -> double& { return c.phantom.sx; });
        real("phantom.sy", [](EC& c) -> double& { return c.phantom.sy; });
        real("phantom.sz", [](EC& c) -> double& { return c.phantom.sz; });
        real("phantom.axis_amplitude_mm", [](EC& c) -> double& { return c.phantom.axis_amplitude_mm; });
        real("phantom.axis_period_mm", [](EC& c) -> double& { return c.phantom.axis_period_mm; });
        real("phantom.axis_offset_x_mm", [](EC& c) -> double& { return c.phantom.axis_offset_x_mm; });
        real("phantom.axis_offset_y_mm", [](EC& c) -> double& { return c.phantom.axis_offset_y_mm; });
        real("phantom.lumen_radius_mm", [](EC& c) -> double& { return c.phantom.lumen_radius_mm; });
        real("phantom.bulge_radius_mm", [](EC& c) -> double& { return c.phantom.bulge_radius_mm; });
        real("phantom.bulge_center_z_mm",
             [](EC& c) -> double& { return c.phantom.bulge_center_z_mm; });
        real("phantom.bulge_sigma_mm", [](EC& c) -> double& { return c.phantom.bulge_sigma_mm; });
        real("phantom.lumen_hu", [](EC& c) -> double& { return c.phantom.lumen_hu; });
        real("phantom.thrombus_hu", [](EC& c) -> double& { return c.phantom.thrombus_hu; });
        real("phantom.background_hu", [](EC& c) -> double& { return c.phantom.background_hu; });
        real("phantom.noise_sigma_hu", [](EC& c) -> double& { return c.phantom.noise_sigma_hu; });
        uinteger("phantom.seed", [](EC& c) -> std::uint64_t& { return c.phantom.seed; });

        integer("experiment.phantoms", [](EC& c) -> int& { return c.n_phantoms; });
        integer("experiment.n_train", [](EC& c) -> int& { return c.n_train; });
        integer("experiment.n_val", [](EC& c) -> int& { return c.n_val; });
        integer("experiment.n_test", [](EC& c) -> int& { return c.n_test; });
        integer("experiment.slice_stride", [](EC& c) -> int& { return c.slice_stride; });
        integer("experiment.crop_px", [](EC& c) -> int& { return c.crop_px; });
        integer("experiment.min_aorta_voxels", [](EC& c) -> int& { return c.min_aorta_voxels; });
        integer("experiment.distractors", [](EC& c) -> int& { return c.distractors_per_phantom; });
        integer("experiment.soft_tissue", [](EC& c) -> int& { return c.soft_tissue_per_phantom; });
        uinteger("experiment.seed", [](EC& c) -> std::uint64_t& { return c.seed; });

        real("recon.gaussian_sigma", [](EC& c) -> double& { return c.recon.gaussian_sigma; });
        real("recon.iso", [](EC& c) -> double& { return c.recon.iso; });
        boolean("recon.keep_largest", [](EC& c) -> bool& { return c.recon.keep_largest; });
        integer("recon.laplacian_iterations",
                [](EC& c) -> int& { return c.recon.laplacian_iterations; });
        real("recon.laplacian_lambda", [](EC& c) -> double& { return c.recon.laplacian_lambda; });
        integer("recon.taubin_iterations", [](EC& c) -> int& { return c.recon.taubin_iterations; });
        real("recon.taubin_lambda", [](EC& c) -> double& { return c.recon.taubin_lambda; });
        real("recon.taubin_mu", [](EC& c) -> double& { return c.recon.taubin_mu; });

        real("centerline.eps_d_mm", [](EC& c) -> double& { return c.fmm.eps_d_mm; });
        real("centerline.exponent", [](EC& c) -> double& { return c.fmm.exponent; });
        real("centerline.step_factor", [](EC& c) -> double& { return c.fmm.step_factor; });
        integer("centerline.tangent_window", [](EC& c) -> int& { return c.tangent_window; });
        return f;
    }();
    return fields;
}

inline const std::map<std::string, const ConfigField*>& config_field_index() {
    static const std::map<std::string, const ConfigField*> index = [] {
        std::map<std::string, const ConfigField*> m;
        for (const auto& fd : config_fields()) m[fd.name] = &fd;
        return m;
    }();
    return index;
}

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Strict sectioned key-value parse: unknown sections, unknown keys,
/// duplicates, and malformed values all fail loudly with the line number.
/// An empty document yields the documented defaults.
inline ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    const auto& index = detail::config_field_index();
    std::set<std::string> known_sections;
    for (const auto& fd : detail::config_fields())
        known_sections.insert(fd.name.substr(0, fd.name.find('.')));

    std::set<std::string> seen;
    std::string section;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string line = text.substr(pos, nl == std::string::npos ? nl : nl - pos);
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        line = detail::trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw config_error("config line " + std::to_string(line_no) +
                                   ": malformed section header " + line);
            section = detail::trim(line.substr(1, line.size() - 2));
            if (!known_sections.count(section))
                throw config_error("config line " + std::to_string(line_no) +
                                   ": unknown section [" + section + "]");
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error("config line " + std::to_string(line_no) +
                               ": expected key = value, got '" + line + "'");
        std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        if (section.empty())
            throw config_error("config line " + std::to_string(line_no) + ": key '" + key +
                               "' appears before any [section] header");
        std::string full = section + "." + key;
        auto it = index.find(full);
        if (it == index.end())
            throw config_error("config line " + std::to_string(line_no) + ": unknown key '" +
                               full + "'");
        if (!seen.insert(full).second)
            throw config_error("config line " + std::to_string(line_no) + ": duplicate key '" +
                               full + "'");
        it->second->parse(cfg, value, line_no);
    }
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw io_error("load_config: cannot open " + path);
    std::string text;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof(buf), f)) > 0) text.append(buf, n);
    std::fclose(f);
    return parse_config(text);
}

/// Canonical full listing; parse_config(echo_config(c)) reproduces c exactly.
inline std::string echo_config(const ExperimentConfig& cfg) {
    std::string out;
    std::string section;
    for (const auto& fd : detail::config_fields()) {
        std::string sec = fd.name.substr(0, fd.name.find('.'));
        if (sec != section) {
            if (!out.empty()) out += "\n";
            out += "[" + sec + "]\n";
            section = sec;
        }
        out += fd.name.substr(fd.name.find('.') + 1) + " = " + fd.print(cfg) + "\n";
    }
    return out;
}

inline void write_effective_config(const ExperimentConfig& cfg, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw io_error("write_effective_config: cannot open " + path);
    std::string text = echo_config(cfg);
    if (std::fwrite(text.data(), 1, text.size(), f) != text.size()) {
        std::fclose(f);
        throw io_error("write_effective_config: short write to " + path);
    }
    std::fclose(f);
}

}  // namespace vmorph
