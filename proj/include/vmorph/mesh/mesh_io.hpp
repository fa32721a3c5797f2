#pragma once

#include <cstdio>
#include <cstring>
#include <string>

#include "vmorph/mesh/trimesh.hpp"

namespace vmorph {

/// ASCII Wavefront OBJ, v/f records only, %.17g coordinates (lossless double
/// round-trip). Face indices are 1-based per the format.
inline void write_obj(const TriMesh& mesh, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw io_error("write_obj: cannot open " + path);
    for (const auto& v : mesh.vertices)
        std::fprintf(f, "v %.17g %.17g %.17g\n", v[0], v[1], v[2]);
    for (const auto& t : mesh.triangles)
        std::fprintf(f, "f %d %d %d\n", t[0] + 1, t[1] + 1, t[2] + 1);
    std::fclose(f);
}

inline TriMesh read_obj(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "r");
    if (!f) throw io_error("read_obj: cannot open " + path);
    TriMesh mesh;
    char line[512];
    int lineno = 0;
    while (std::fgets(line, sizeof line, f)) {
        ++lineno;
        if (line[0] == '#' || line[0] == '\n' || line[0] == '\0') continue;
        if (line[0] == 'v' && line[1] == ' ') {
            Vec3 v;
            if (std::sscanf(line + 2, "%lf %lf %lf", &v[0], &v[1], &v[2]) != 3) {
                std::fclose(f);
                throw format_error("read_obj: bad vertex at line " + std::to_string(lineno));
            }
            mesh.vertices.push_back(v);
        } else if (line[0] == 'f' && line[1] == ' ') {
            int a, b, c;
            if (std::sscanf(line + 2, "%d %d %d", &a, &b, &c) != 3) {
                std::fclose(f);
                throw format_error("read_obj: bad face at line " + std::to_string(lineno));
            }
            mesh.triangles.push_back({a - 1, b - 1, c - 1});
        }
        // other record types (vn, vt, o, ...) are skipped
    }
    std::fclose(f);
    mesh.validate();
    return mesh;
}

namespace detail {

inline void put_f32(std::string& buf, float v) {
    char b[4];
    std::memcpy(b, &v, 4);
    buf.append(b, 4);
}

}  // namespace detail

/// Binary little-endian STL: 80-byte header, u32 triangle count, then 50-byte
/// records (normal + 3 vertices as float32, u16 attribute). Positions are
/// quantized to float32 by the format.
inline void write_stl(const TriMesh& mesh, const std::string& path) {
    std::string buf;
    buf.resize(80, '\0');
    std::string tag = "binary stl";
    std::memcpy(buf.data(), tag.data(), tag.size());
    std::uint32_t n = static_cast<std::uint32_t>(mesh.triangles.size());
    char nb[4] = {static_cast<char>(n & 0xff), static_cast<char>((n >> 8) & 0xff),
                  static_cast<char>((n >> 16) & 0xff), static_cast<char>((n >> 24) & 0xff)};
    buf.append(nb, 4);
    for (const auto& t : mesh.triangles) {
        const Vec3& a = mesh.vertices[t[0]];
        const Vec3& b = mesh.vertices[t[1]];
        const Vec3& c = mesh.vertices[t[2]];
        Vec3 nrm = cross(b - a, c - a);
        double len = norm(nrm);
        if (len > 0) nrm = (1.0 / len) * nrm;
        for (int i = 0; i < 3; ++i) detail::put_f32(buf, static_cast<float>(nrm[i]));
        for (const Vec3* p : {&a, &b, &c})
            for (int i = 0; i < 3; ++i) detail::put_f32(buf, static_cast<float>((*p)[i]));
        buf.append(2, '\0');  // attribute byte count
    }
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw io_error("write_stl: cannot open " + path);
    std::size_t written = std::fwrite(buf.data(), 1, buf.size(), f);
    std::fclose(f);
    if (written != buf.size()) throw io_error("write_stl: short write to " + path);
}

/// Reads binary STL and rebuilds shared vertices by welding bit-identical
/// float32 positions, so meshes written by write_stl recover their original
/// vertex count (modulo f32 collisions, which our lattice meshes do not hit).
inline TriMesh read_stl(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw io_error("read_stl: cannot open " + path);
    std::string buf;
    {
        std::fseek(f, 0, SEEK_END);
        long size = std::ftell(f);
        std::fseek(f, 0, SEEK_SET);
        buf.resize(static_cast<std::size_t>(size));
        if (std::fread(buf.data(), 1, buf.size(), f) != buf.size()) {
            std::fclose(f);
            throw io_error("read_stl: short read from " + path);
        }
        std::fclose(f);
    }
    if (buf.size() < 84) throw format_error("read_stl: file shorter than the fixed header");
    std::uint32_t n = 0;
    for (int i = 3; i >= 0; --i) n = (n << 8) | static_cast<unsigned char>(buf[80 + i]);
    if (buf.size() != 84 + static_cast<std::size_t>(n) * 50)
        throw format_error("read_stl: size does not match triangle count " + std::to_string(n));

    TriMesh mesh;
    std::map<std::array<float, 3>, int> weld;
    const char* p = buf.data() + 84;
    for (std::uint32_t t = 0; t < n; ++t, p += 50) {
        std::array<int, 3> tri;
        for (int v = 0; v < 3; ++v) {
            std::array<float, 3> pos;
            std::memcpy(pos.data(), p + 12 + v * 12, 12);  // skip the normal
            auto [it, fresh] = weld.try_emplace(pos, static_cast<int>(mesh.vertices.size()));
            if (fresh) mesh.vertices.push_back({pos[0], pos[1], pos[2]});
            tri[v] = it->second;
        }
        mesh.triangles.push_back(tri);
    }
    return mesh;
}

}  // namespace vmorph
