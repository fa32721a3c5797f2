#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "vmorph/volume.hpp"
#include "vmorph/volume_ops.hpp"

namespace vmorph {

/// Multi-organ label volume plus the table naming each label id and the set
/// of vascular ids that must never be excluded from supervision.
struct OrganLabelMap {
    Volume3D volume;  // integer-labels
    std::map<int, std::string> label_table;
    std::set<int> vascular_ids;

    void validate() const {
        volume.validate();
        if (volume.kind != VolumeKind::integer_labels)
            throw value_error("OrganLabelMap: volume kind must be integer-labels");
        for (int id : vascular_ids)
            if (!label_table.count(id))
                throw value_error("OrganLabelMap: vascular id " + std::to_string(id) +
                                  " missing from label table");
        for (double v : volume.data) {
            int id = static_cast<int>(v);
            if (id != 0 && !label_table.count(id))
                throw value_error("OrganLabelMap: label id " + std::to_string(id) +
                                  " present in volume but missing from label table");
        }
    }
};

/// Per-pixel {0,1} allow mask; 1 marks anatomically plausible pixels where
/// the loss is evaluated.
struct AllowMask {
    int height = 0, width = 0;
    std::vector<double> data;  // {0,1}

    AllowMask() = default;
    AllowMask(int h, int w, double fill = 1.0)
        : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

    std::size_t size() const { return data.size(); }
};

/// Merges all non-vascular, non-background labels into a binary exclusion
/// mask: voxel = 1 iff its label is nonzero and not vascular.
inline Volume3D build_exclusion_mask(const OrganLabelMap& labels) {
    labels.validate();
    const Volume3D& lv = labels.volume;
    Volume3D out(lv.nx, lv.ny, lv.nz, lv.sx, lv.sy, lv.sz, VolumeKind::binary_mask);
    out.origin = lv.origin;
    for (std::size_t i = 0; i < lv.data.size(); ++i) {
        int id = static_cast<int>(lv.data[i]);
        out.data[i] = (id != 0 && !labels.vascular_ids.count(id)) ? 1.0 : 0.0;
    }
    return out;
}

/// Allow mask for one axial slice: A = 1 - exclusion, resampled/aligned to
/// the target slice grid with nearest interpolation when shapes differ.
inline AllowMask allow_mask_for_slice(const Volume3D& exclusion, int slice_index,
                                      int target_h = 0, int target_w = 0,
                                      double target_sx = 0.0, double target_sy = 0.0) {
    if (exclusion.kind != VolumeKind::binary_mask)
        throw value_error("allow_mask_for_slice: exclusion volume must be a binary mask");
    Slice2D ex = extract_slice(exclusion, slice_index);
    if (target_h == 0) target_h = ex.height;
    if (target_w == 0) target_w = ex.width;
    if (target_sx == 0.0) target_sx = ex.sx;
    if (target_sy == 0.0) target_sy = ex.sy;

    if (target_h != ex.height || target_w != ex.width) {
        // nearest-neighbor alignment onto the paired ground-truth grid
        double ph_w = ex.width * ex.sx, ph_h = ex.height * ex.sy;
        if (std::abs(target_w * target_sx - ph_w) > 0.5 * ex.sx ||
            std::abs(target_h * target_sy - ph_h) > 0.5 * ex.sy)
            throw value_error("allow_mask_for_slice: slice grids cover different extents");
        Slice2D aligned(target_h, target_w, target_sx, target_sy);
        for (int y = 0; y < target_h; ++y) {
            int sy_i = std::clamp(static_cast<int>(std::lround(((y + 0.5) * target_sy) / ex.sy - 0.5)),
                                  0, ex.height - 1);
            for (int x = 0; x < target_w; ++x) {
                int sx_i = std::clamp(static_cast<int>(std::lround(((x + 0.5) * target_sx) / ex.sx - 0.5)),
                                      0, ex.width - 1);
                aligned.at(y, x) = ex.at(sy_i, sx_i);
            }
        }
        ex = std::move(aligned);
    }

    AllowMask a(ex.height, ex.width);
    for (std::size_t i = 0; i < ex.data.size(); ++i) a.data[i] = 1.0 - ex.data[i];
    return a;
}

/// Forces A=1 wherever the ground truth is positive. Registration noise can
/// push true-positive pixels inside the exclusion mask; without this override
/// those pixels would silently lose supervision.
inline void apply_gt_override(AllowMask& a, const Slice2D& gt) {
    if (gt.height != a.height || gt.width != a.width)
        throw value_error("apply_gt_override: ground-truth shape does not match allow mask");
    for (std::size_t i = 0; i < a.data.size(); ++i)
        if (gt.data[i] != 0.0) a.data[i] = 1.0;
}

/// Ascending indices of axial slices containing at least min_voxels voxels of
/// the vascular label named "aorta".
inline std::vector<int> filter_slices_by_aorta(const OrganLabelMap& labels, int min_voxels = 1) {
    if (min_voxels < 1) throw value_error("filter_slices_by_aorta: min_voxels must be >= 1");
    int aorta_id = -1;
    for (const auto& [id, name] : labels.label_table)
        if (name == "aorta") aorta_id = id;
    if (aorta_id < 0)
        throw config_error("filter_slices_by_aorta: no label named 'aorta' in label table");

    const Volume3D& lv = labels.volume;
    std::vector<int> out;
    const std::size_t plane = static_cast<std::size_t>(lv.nx) * lv.ny;
    for (int z = 0; z < lv.nz; ++z) {
        int count = 0;
        const double* p = lv.data.data() + z * plane;
        for (std::size_t i = 0; i < plane; ++i)
            if (static_cast<int>(p[i]) == aorta_id) ++count;
        if (count >= min_voxels) out.push_back(z);
    }
    return out;
}

/// Tab-separated label table, one "id name vascular" row per label.
inline void write_label_table(const OrganLabelMap& labels, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw io_error("write_label_table: cannot open " + path);
    for (const auto& [id, name] : labels.label_table)
        std::fprintf(f, "%d\t%s\t%d\n", id, name.c_str(), labels.vascular_ids.count(id) ? 1 : 0);
    std::fclose(f);
}

inline OrganLabelMap read_label_table(Volume3D volume, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "r");
    if (!f) throw io_error("read_label_table: cannot open " + path);
    OrganLabelMap labels;
    labels.volume = std::move(volume);
    char line[512];
    int line_no = 0;
    while (std::fgets(line, sizeof(line), f)) {
        ++line_no;
        int id = 0, vascular = 0;
        char name[256];
        if (std::sscanf(line, "%d\t%255[^\t]\t%d", &id, name, &vascular) != 3) {
            std::fclose(f);
            throw format_error("read_label_table: bad row at line " + std::to_string(line_no) +
                               " of " + path);
        }
        labels.label_table[id] = name;
        if (vascular) labels.vascular_ids.insert(id);
    }
    std::fclose(f);
    labels.validate();
    return labels;
}

}  // namespace vmorph
