#include <catch2/catch_amalgamated.hpp>

#include "airtopo/core.hpp"

using namespace airtopo;

TEST_CASE("grid construction validates dims and spacing") {
    CHECK_THROWS_AS(Volume3D(0, 3, 3, Spacing{1, 1, 1}), GeometryError);
    CHECK_THROWS_AS(Volume3D(3, 3, 3, Spacing{0, 1, 1}), GeometryError);
    CHECK_THROWS_AS(Volume3D(3, 3, 3, Spacing{-1, 1, 1}), GeometryError);
    CHECK_THROWS_AS(BinaryMask(2, 2, 2, Spacing{1, 1, 1}, std::vector<std::uint8_t>(7)), GeometryError);
    CHECK_NOTHROW(Volume3D(1, 1, 1, Spacing{0.5, 0.5, 1.0}));
}

TEST_CASE("linear index <-> coordinate mapping is a bijection") {
    // odd-shaped grid, exhaustive
    {
        Volume3D v(5, 6, 7, Spacing{1, 1, 1});
        std::size_t expect = 0;
        for (int z = 0; z < 7; ++z)
            for (int y = 0; y < 6; ++y)
                for (int x = 0; x < 5; ++x, ++expect) {
                    REQUIRE(v.index(x, y, z) == expect);
                    const Voxel c = v.coord(expect);
                    REQUIRE(c == Voxel{x, y, z});
                }
    }
    // full 64^3, round-trip both ways
    {
        BinaryMask m(64, 64, 64, Spacing{1, 1, 1});
        for (std::size_t i = 0; i < m.size(); ++i)
            REQUIRE(m.index(m.coord(i)) == i);
    }
}

TEST_CASE("x is the fastest-varying axis") {
    Volume3D v(4, 3, 2, Spacing{1, 1, 1});
    CHECK(v.index(1, 0, 0) == 1);
    CHECK(v.index(0, 1, 0) == 4);
    CHECK(v.index(0, 0, 1) == 12);
}

TEST_CASE("voxel distances honor anisotropic spacing") {
    const Spacing s{0.5, 1.0, 2.0};
    CHECK(voxel_distance_mm({0, 0, 0}, {2, 0, 0}, s) == Catch::Approx(1.0));
    CHECK(voxel_distance_mm({0, 0, 0}, {0, 0, 1}, s) == Catch::Approx(2.0));
    CHECK(voxel_distance_mm({0, 0, 0}, {2, 1, 1}, s) == Catch::Approx(std::sqrt(1.0 + 1.0 + 4.0)));
}

TEST_CASE("geometry comparison covers dims and spacing") {
    Volume3D a(3, 3, 3, Spacing{1, 1, 1});
    BinaryMask b(3, 3, 3, Spacing{1, 1, 1});
    BinaryMask c(3, 3, 3, Spacing{1, 1, 2});
    BinaryMask d(3, 3, 4, Spacing{1, 1, 1});
    CHECK(a.same_geometry(b));
    CHECK_FALSE(a.same_geometry(c));
    CHECK_FALSE(a.same_geometry(d));
    CHECK_THROWS_AS(require_same_geometry(a, c, "test"), GeometryError);
}
