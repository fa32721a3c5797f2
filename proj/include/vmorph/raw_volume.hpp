#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "vmorph/volume.hpp"

namespace vmorph {

// Raw sidecar format used by tests and scratch pipelines: one plain-text
// header line, then a little-endian float64 payload in x-fastest order.
//
//   RAWVOL1 nx ny nz sx sy sz kind\n
//   <nx*ny*nz doubles>

inline void write_raw_volume(const Volume3D& vol, const std::filesystem::path& path) {
    vol.check_geometry();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw io_error("write_raw_volume: cannot open " + path.string());
    std::ostringstream hdr;
    hdr.precision(17);
    hdr << "RAWVOL1 " << vol.nx << ' ' << vol.ny << ' ' << vol.nz << ' ' << vol.sx << ' '
        << vol.sy << ' ' << vol.sz << ' ' << to_string(vol.kind) << '\n';
    f << hdr.str();
    f.write(reinterpret_cast<const char*>(vol.data.data()),
            static_cast<std::streamsize>(vol.data.size() * sizeof(double)));
    if (!f) throw io_error("write_raw_volume: write failed for " + path.string());
}

inline Volume3D read_raw_volume(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("read_raw_volume: cannot open " + path.string());
    std::string line;
    if (!std::getline(f, line)) throw io_error("read_raw_volume: missing header line");
    std::istringstream hdr(line);
    std::string magic, kind_str;
    int nx, ny, nz;
    double sx, sy, sz;
    if (!(hdr >> magic >> nx >> ny >> nz >> sx >> sy >> sz >> kind_str) || magic != "RAWVOL1")
        throw format_error("read_raw_volume: bad header in " + path.string());
    VolumeKind kind;
    if (kind_str == "intensity") kind = VolumeKind::intensity;
    else if (kind_str == "binary-mask") kind = VolumeKind::binary_mask;
    else if (kind_str == "integer-labels") kind = VolumeKind::integer_labels;
    else throw format_error("read_raw_volume: unknown kind '" + kind_str + "'");

    Volume3D vol(nx, ny, nz, sx, sy, sz, kind);
    if (!f.read(reinterpret_cast<char*>(vol.data.data()),
                static_cast<std::streamsize>(vol.data.size() * sizeof(double))))
        throw io_error("read_raw_volume: payload truncated in " + path.string());
    vol.validate();
    return vol;
}

}  // namespace vmorph
