#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "vmorph/raw_volume.hpp"

using namespace vmorph;
namespace fs = std::filesystem;

namespace {
fs::path tmp_path(const char* name) {
    auto dir = fs::temp_directory_path() / "vmorph_raw_tests";
    fs::create_directories(dir);
    return dir / name;
}
}  // namespace

TEST_CASE("raw volume round-trip is bit-exact") {
    Volume3D v(3, 4, 5, 0.123456789012345, 1.0, 2.5, VolumeKind::integer_labels);
    for (std::size_t i = 0; i < v.data.size(); ++i) v.data[i] = static_cast<double>(i % 7);
    auto p = tmp_path("labels.rawvol");
    write_raw_volume(v, p.string());
    Volume3D back = read_raw_volume(p.string());
    REQUIRE(back.nx == v.nx);
    REQUIRE(back.ny == v.ny);
    REQUIRE(back.nz == v.nz);
    REQUIRE(back.sx == v.sx);  // header keeps 17 significant digits
    REQUIRE(back.kind == VolumeKind::integer_labels);
    REQUIRE(back.data == v.data);
}

TEST_CASE("raw volume header rejects foreign files") {
    auto p = tmp_path("garbage.rawvol");
    std::ofstream(p) << "PNG89a whatever\n";
    REQUIRE_THROWS_AS(read_raw_volume(p.string()), format_error);
}

TEST_CASE("truncated raw payload is an io error") {
    Volume3D v(8, 8, 8, 1, 1, 1, VolumeKind::intensity);
    auto p = tmp_path("trunc.rawvol");
    write_raw_volume(v, p.string());
    fs::resize_file(p, fs::file_size(p) - 100);
    REQUIRE_THROWS_AS(read_raw_volume(p.string()), io_error);
}

TEST_CASE("missing raw file is an io error") {
    REQUIRE_THROWS_AS(read_raw_volume("/no/such/file.rawvol"), io_error);
}
