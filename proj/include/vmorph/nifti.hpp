#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "vmorph/volume.hpp"

// Minimal NIfTI-1 single-file (.nii) support. Only the fields this pipeline
// needs are honored: sizeof_hdr, dim, datatype, bitpix, pixdim, vox_offset,
// scl_slope, scl_inter, magic. qform/sform orientation is ignored: volumes
// are treated as axis-aligned with the header's pixdim spacing, and the
// in-memory origin is not persisted.

namespace vmorph {

static_assert(std::endian::native == std::endian::little,
              "NIfTI I/O assumes a little-endian host");

namespace nifti_detail {

constexpr std::int32_t kHeaderSize = 348;

// datatype codes from the NIfTI-1 standard
constexpr std::int16_t DT_UINT8 = 2;
constexpr std::int16_t DT_INT16 = 4;
constexpr std::int16_t DT_INT32 = 8;
constexpr std::int16_t DT_FLOAT32 = 16;
constexpr std::int16_t DT_FLOAT64 = 64;

template <typename T>
T get(const unsigned char* buf, std::size_t offset) {
    T v;
    std::memcpy(&v, buf + offset, sizeof(T));
    return v;
}

template <typename T>
void put(unsigned char* buf, std::size_t offset, T v) {
    std::memcpy(buf + offset, &v, sizeof(T));
}

template <typename Raw>
void decode_payload(const std::vector<unsigned char>& bytes, std::vector<double>& out) {
    const std::size_t n = bytes.size() / sizeof(Raw);
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        Raw r;
        std::memcpy(&r, bytes.data() + i * sizeof(Raw), sizeof(Raw));
        out[i] = static_cast<double>(r);
    }
}

}  // namespace nifti_detail

inline Volume3D read_nifti(const std::filesystem::path& path,
                           VolumeKind kind = VolumeKind::intensity) {
    namespace nd = nifti_detail;
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("read_nifti: cannot open " + path.string());

    unsigned char hdr[nd::kHeaderSize];
    if (!f.read(reinterpret_cast<char*>(hdr), nd::kHeaderSize))
        throw io_error("read_nifti: header truncated in " + path.string());

    const auto sizeof_hdr = nd::get<std::int32_t>(hdr, 0);
    if (sizeof_hdr != nd::kHeaderSize) {
        if (sizeof_hdr == 1543569408)  // 348 byte-swapped
            throw format_error("read_nifti: byte-swapped NIfTI-1 is not supported");
        throw format_error("read_nifti: sizeof_hdr != 348 in " + path.string());
    }
    char magic[4];
    std::memcpy(magic, hdr + 344, 4);
    const bool single_file = std::memcmp(magic, "n+1", 4) == 0;
    const bool pair_file = std::memcmp(magic, "ni1", 4) == 0;
    if (!single_file && !pair_file)
        throw format_error("read_nifti: bad magic in " + path.string());

    const auto dim0 = nd::get<std::int16_t>(hdr, 40);
    if (dim0 != 3)
        throw format_error("read_nifti: only 3D volumes are supported (dim[0] = " +
                           std::to_string(dim0) + ")");
    const int nx = nd::get<std::int16_t>(hdr, 42);
    const int ny = nd::get<std::int16_t>(hdr, 44);
    const int nz = nd::get<std::int16_t>(hdr, 46);
    if (nx < 1 || ny < 1 || nz < 1)
        throw format_error("read_nifti: non-positive dims in " + path.string());

    const auto datatype = nd::get<std::int16_t>(hdr, 70);
    const double sx = nd::get<float>(hdr, 76 + 4);
    const double sy = nd::get<float>(hdr, 76 + 8);
    const double sz = nd::get<float>(hdr, 76 + 12);
    const double vox_offset = nd::get<float>(hdr, 108);
    const double scl_slope = nd::get<float>(hdr, 112);
    const double scl_inter = nd::get<float>(hdr, 116);

    std::size_t bytes_per_voxel;
    switch (datatype) {
        case nd::DT_UINT8: bytes_per_voxel = 1; break;
        case nd::DT_INT16: bytes_per_voxel = 2; break;
        case nd::DT_INT32: bytes_per_voxel = 4; break;
        case nd::DT_FLOAT32: bytes_per_voxel = 4; break;
        case nd::DT_FLOAT64: bytes_per_voxel = 8; break;
        default:
            throw format_error("read_nifti: unsupported datatype code " +
                               std::to_string(datatype));
    }

    const std::size_t nvox = static_cast<std::size_t>(nx) * ny * nz;
    std::vector<unsigned char> payload(nvox * bytes_per_voxel);
    if (single_file) {
        f.seekg(static_cast<std::streamoff>(vox_offset), std::ios::beg);
        if (!f.read(reinterpret_cast<char*>(payload.data()),
                    static_cast<std::streamsize>(payload.size())))
            throw io_error("read_nifti: payload truncated in " + path.string());
    } else {
        auto img = path;
        img.replace_extension(".img");
        std::ifstream fi(img, std::ios::binary);
        if (!fi) throw io_error("read_nifti: cannot open paired image " + img.string());
        fi.seekg(static_cast<std::streamoff>(vox_offset), std::ios::beg);
        if (!fi.read(reinterpret_cast<char*>(payload.data()),
                     static_cast<std::streamsize>(payload.size())))
            throw io_error("read_nifti: payload truncated in " + img.string());
    }

    Volume3D vol(nx, ny, nz, sx, sy, sz, kind);
    switch (datatype) {
        case nd::DT_UINT8: nd::decode_payload<std::uint8_t>(payload, vol.data); break;
        case nd::DT_INT16: nd::decode_payload<std::int16_t>(payload, vol.data); break;
        case nd::DT_INT32: nd::decode_payload<std::int32_t>(payload, vol.data); break;
        case nd::DT_FLOAT32: nd::decode_payload<float>(payload, vol.data); break;
        case nd::DT_FLOAT64: nd::decode_payload<double>(payload, vol.data); break;
    }
    if (scl_slope != 0.0 && !(scl_slope == 1.0 && scl_inter == 0.0)) {
        for (double& v : vol.data) v = v * scl_slope + scl_inter;
    }
    vol.validate();
    return vol;
}

/// Writes a single-file .nii with a float64 payload, scl_slope=1, scl_inter=0.
/// read_nifti(write_nifti(v)) reproduces dims, spacing (with float32 header
/// precision) and bit-exact voxel data.
inline void write_nifti(const Volume3D& vol, const std::filesystem::path& path) {
    namespace nd = nifti_detail;
    vol.check_geometry();
    if (vol.nx > 32767 || vol.ny > 32767 || vol.nz > 32767)
        throw value_error("write_nifti: dims exceed the NIfTI-1 short range");

    unsigned char hdr[nd::kHeaderSize] = {};
    nd::put<std::int32_t>(hdr, 0, nd::kHeaderSize);
    hdr[38] = 'r';  // regular
    nd::put<std::int16_t>(hdr, 40, 3);  // dim[0]
    nd::put<std::int16_t>(hdr, 42, static_cast<std::int16_t>(vol.nx));
    nd::put<std::int16_t>(hdr, 44, static_cast<std::int16_t>(vol.ny));
    nd::put<std::int16_t>(hdr, 46, static_cast<std::int16_t>(vol.nz));
    for (std::size_t off = 48; off <= 54; off += 2) nd::put<std::int16_t>(hdr, off, 1);
    nd::put<std::int16_t>(hdr, 70, nd::DT_FLOAT64);
    nd::put<std::int16_t>(hdr, 72, 64);  // bitpix
    nd::put<float>(hdr, 76, 1.0f);       // pixdim[0] (qfac placeholder)
    nd::put<float>(hdr, 80, static_cast<float>(vol.sx));
    nd::put<float>(hdr, 84, static_cast<float>(vol.sy));
    nd::put<float>(hdr, 88, static_cast<float>(vol.sz));
    nd::put<float>(hdr, 108, 352.0f);  // vox_offset: header + 4-byte extension flag
    nd::put<float>(hdr, 112, 1.0f);    // scl_slope
    nd::put<float>(hdr, 116, 0.0f);    // scl_inter
    std::memcpy(hdr + 344, "n+1\0", 4);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw io_error("write_nifti: cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(hdr), nd::kHeaderSize);
    const char ext[4] = {0, 0, 0, 0};
    f.write(ext, 4);
    f.write(reinterpret_cast<const char*>(vol.data.data()),
            static_cast<std::streamsize>(vol.data.size() * sizeof(double)));
    if (!f) throw io_error("write_nifti: write failed for " + path.string());
}

}  // namespace vmorph
