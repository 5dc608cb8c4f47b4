#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "airtopo/nifti.hpp"
#include "airtopo/rng.hpp"
#include "oracles.hpp"

using namespace airtopo;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("airtopo_nifti_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const char* name) const { return (path / name).string(); }
};

std::vector<char> slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::vector<char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

} // namespace

TEST_CASE("all-zero float volume reads back with dims and payload") {
    TempDir tmp;
    Volume3D v(3, 3, 3, Spacing{1, 1, 1});
    write_nifti(v, tmp.file("z.nii"));
    const Volume3D r = read_nifti_volume(tmp.file("z.nii"));
    REQUIRE(r.nx() == 3);
    REQUIRE(r.ny() == 3);
    REQUIRE(r.nz() == 3);
    for (std::size_t i = 0; i < r.size(); ++i) REQUIRE(r[i] == 0.0f);
}

TEST_CASE("scl_slope / scl_inter scaling is applied") {
    TempDir tmp;
    auto h = nifti::make_header(1, 1, 1, Spacing{1, 1, 1}, {}, nifti::kDtInt16, 16);
    h.scl_slope = 2.0f;
    h.scl_inter = -1000.0f;
    const std::int16_t raw = 600;
    nifti::write_file(tmp.file("s.nii"), h, &raw, sizeof(raw));
    const Volume3D v = read_nifti_volume(tmp.file("s.nii"));
    CHECK(v[0] == 200.0f);
}

TEST_CASE("float32 round trip is bit-identical over randomized volumes") {
    TempDir tmp;
    Rng rng(20240811);
    for (int rep = 0; rep < 20; ++rep) {
        Volume3D v(8, 8, 8, Spacing{double(0.7f), double(0.9f), double(1.3f)});
        for (auto& s : v.data()) s = static_cast<float>(rng.uniform(-1100.0, 3000.0));
        write_nifti(v, tmp.file("rt.nii"));
        const Volume3D r = read_nifti_volume(tmp.file("rt.nii"));
        REQUIRE(r.same_geometry(v));
        REQUIRE(std::memcmp(r.data().data(), v.data().data(), v.size() * sizeof(float)) == 0);

        // writing the re-read volume reproduces the same payload bytes
        write_nifti(r, tmp.file("rt2.nii"));
        REQUIRE(slurp(tmp.file("rt.nii")) == slurp(tmp.file("rt2.nii")));
    }
}

TEST_CASE("single-voxel mask file size follows the header layout") {
    TempDir tmp;
    BinaryMask m(1, 1, 1, Spacing{1, 1, 1});
    m[0] = 1;
    write_nifti(m, tmp.file("one.nii"));
    // 348-byte header + 4 alignment bytes (vox_offset 352) + 1 payload byte
    CHECK(fs::file_size(tmp.file("one.nii")) == 353);
}

TEST_CASE("spacing survives the round trip exactly") {
    TempDir tmp;
    BinaryMask m(2, 2, 2, Spacing{0.5, 0.5, 1.0});
    write_nifti(m, tmp.file("sp.nii"));
    const BinaryMask r = read_nifti_mask(tmp.file("sp.nii"));
    CHECK(r.spacing().dx == 0.5);
    CHECK(r.spacing().dy == 0.5);
    CHECK(r.spacing().dz == 1.0);
}

TEST_CASE("masks round trip exactly") {
    TempDir tmp;
    Rng rng(7);
    BinaryMask m(6, 5, 4, Spacing{double(0.8f), double(0.8f), 1.5});
    for (auto& v : m.data()) v = rng.uniform() < 0.4 ? 1 : 0;
    write_nifti(m, tmp.file("m.nii"));
    const BinaryMask r = read_nifti_mask(tmp.file("m.nii"));
    REQUIRE(r.same_geometry(m));
    REQUIRE(r.data() == m.data());
}

TEST_CASE("format violations are rejected with the offending field named") {
    TempDir tmp;

    SECTION("bad magic") {
        auto h = nifti::make_header(1, 1, 1, Spacing{1, 1, 1}, {}, nifti::kDtUint8, 8);
        std::memcpy(h.magic, "ni1", 4);
        const std::uint8_t one = 1;
        nifti::write_file(tmp.file("bad.nii"), h, &one, 1);
        CHECK_THROWS_MATCHES(read_nifti_mask(tmp.file("bad.nii")), FormatError,
                             Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("magic")));
    }

    SECTION("unsupported datatype") {
        auto h = nifti::make_header(1, 1, 1, Spacing{1, 1, 1}, {}, 64 /* float64 */, 64);
        const double x = 0.0;
        nifti::write_file(tmp.file("dt.nii"), h, &x, 8);
        CHECK_THROWS_MATCHES(read_nifti_volume(tmp.file("dt.nii")), FormatError,
                             Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("datatype")));
    }

    SECTION("non-positive pixdim") {
        auto h = nifti::make_header(1, 1, 1, Spacing{1, 1, 1}, {}, nifti::kDtUint8, 8);
        h.pixdim[2] = 0.0f;
        const std::uint8_t one = 1;
        nifti::write_file(tmp.file("px.nii"), h, &one, 1);
        CHECK_THROWS_AS(read_nifti_mask(tmp.file("px.nii")), GeometryError);
    }

    SECTION("wrong dim[0]") {
        auto h = nifti::make_header(1, 1, 1, Spacing{1, 1, 1}, {}, nifti::kDtUint8, 8);
        h.dim[0] = 4;
        const std::uint8_t one = 1;
        nifti::write_file(tmp.file("d0.nii"), h, &one, 1);
        CHECK_THROWS_AS(read_nifti_mask(tmp.file("d0.nii")), FormatError);
    }

    SECTION("truncated payload") {
        auto h = nifti::make_header(4, 4, 4, Spacing{1, 1, 1}, {}, nifti::kDtUint8, 8);
        const std::uint8_t few[10] = {};
        nifti::write_file(tmp.file("tr.nii"), h, few, 10);
        CHECK_THROWS_AS(read_nifti_mask(tmp.file("tr.nii")), FormatError);
    }

    SECTION("mask values outside {0,1}") {
        BinaryMask m(1, 1, 1, Spacing{1, 1, 1});
        write_nifti(m, tmp.file("v2.nii"));
        auto bytes = slurp(tmp.file("v2.nii"));
        bytes[352] = 2;
        std::ofstream(tmp.file("v2.nii"), std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        CHECK_THROWS_AS(read_nifti_mask(tmp.file("v2.nii")), FormatError);
    }

    SECTION("mask must be uint8") {
        Volume3D v(2, 2, 2, Spacing{1, 1, 1});
        write_nifti(v, tmp.file("f32.nii"));
        CHECK_THROWS_AS(read_nifti_mask(tmp.file("f32.nii")), FormatError);
    }

    SECTION("missing file") {
        CHECK_THROWS_AS(read_nifti_volume(tmp.file("nope.nii")), IoError);
    }
}

TEST_CASE("int16 volumes load") {
    TempDir tmp;
    auto h = nifti::make_header(2, 1, 1, Spacing{1, 1, 1}, {}, nifti::kDtInt16, 16);
    const std::int16_t raw[2] = {-1000, 400};
    nifti::write_file(tmp.file("i16.nii"), h, raw, sizeof(raw));
    const Volume3D v = read_nifti_volume(tmp.file("i16.nii"));
    CHECK(v[0] == -1000.0f);
    CHECK(v[1] == 400.0f);
}

TEST_CASE("uint8 {0,1} files load as masks on request and as volumes otherwise") {
    TempDir tmp;
    BinaryMask m(2, 2, 1, Spacing{1, 1, 1});
    m(0, 0, 0) = 1;
    m(1, 1, 0) = 1;
    write_nifti(m, tmp.file("u8.nii"));
    const BinaryMask rm = read_nifti_mask(tmp.file("u8.nii"));
    CHECK(rm.data() == m.data());
    const Volume3D rv = read_nifti_volume(tmp.file("u8.nii"));
    CHECK(rv[0] == 1.0f);
    CHECK(rv[1] == 0.0f);
}
