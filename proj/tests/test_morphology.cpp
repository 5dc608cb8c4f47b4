#include <catch2/catch_amalgamated.hpp>

#include "airtopo/morphology.hpp"
#include "airtopo/rng.hpp"
#include "oracles.hpp"

using namespace airtopo;

TEST_CASE("connected components: disjoint voxels and a solid cube") {
    BinaryMask m(5, 5, 5, Spacing{1, 1, 1});
    m(0, 0, 0) = 1;
    m(4, 4, 4) = 1;
    const auto cl = connected_components(m);
    CHECK(cl.count == 2);
    REQUIRE(cl.sizes.size() == 2);
    CHECK(cl.sizes[0] == 1);
    CHECK(cl.sizes[1] == 1);

    BinaryMask cube(3, 3, 3, Spacing{1, 1, 1}, std::uint8_t{1});
    const auto cc = connected_components(cube);
    CHECK(cc.count == 1);
    CHECK(cc.sizes[0] == 27);

    const auto empty = connected_components(BinaryMask(3, 3, 3, Spacing{1, 1, 1}));
    CHECK(empty.count == 0);
}

TEST_CASE("connected components match the flood-fill oracle on random masks") {
    Rng rng(101);
    for (int rep = 0; rep < 8; ++rep) {
        const auto m = oracles::random_mask(rng, 16, 16, 16, Spacing{1, 1, 1}, 0.25 + 0.05 * rep);
        const auto cl = connected_components(m);
        const auto ref = oracles::flood_fill_labels(m);
        REQUIRE(oracles::same_partition(cl.labels, ref));
        // sizes agree with a plain count
        std::size_t fg = 0;
        for (auto v : m.data()) fg += v;
        std::size_t total = 0;
        for (auto s : cl.sizes) total += s;
        REQUIRE(total == fg);
    }
}

TEST_CASE("largest component selection and tie-breaks") {
    SECTION("strict maximum wins") {
        BinaryMask m(12, 3, 3, Spacing{1, 1, 1});
        for (int x = 0; x < 5; ++x) m(x, 0, 0) = 1;     // size 5
        for (int x = 8; x < 11; ++x) m(x, 2, 2) = 1;    // size 3
        const auto lc = largest_component(m);
        CHECK(count_foreground(lc) == 5);
        CHECK(lc(0, 0, 0) == 1);
        CHECK(lc(8, 2, 2) == 0);
    }
    SECTION("single component is identity") {
        BinaryMask m(4, 4, 4, Spacing{1, 1, 1});
        m(1, 1, 1) = m(1, 2, 1) = m(2, 2, 1) = 1;
        CHECK(largest_component(m).data() == m.data());
    }
    SECTION("ties go to the component seen first") {
        BinaryMask m(16, 1, 1, Spacing{1, 1, 1});
        for (int x = 0; x < 4; ++x) m(x, 0, 0) = 1;
        for (int x = 9; x < 13; ++x) m(x, 0, 0) = 1;
        const auto lc = largest_component(m);
        CHECK(lc(0, 0, 0) == 1);
        CHECK(lc(9, 0, 0) == 0);
    }
    SECTION("empty input stays empty") {
        BinaryMask m(3, 3, 3, Spacing{1, 1, 1});
        CHECK(count_foreground(largest_component(m)) == 0);
    }
}

TEST_CASE("dilation examples") {
    SECTION("unit ball on a unit grid is the 6-neighbourhood cross") {
        BinaryMask m(5, 5, 5, Spacing{1, 1, 1});
        m(2, 2, 2) = 1;
        const auto d = dilate_ball(m, 1.0);
        CHECK(count_foreground(d) == 7);
        CHECK(d(2, 2, 2) == 1);
        CHECK(d(1, 2, 2) == 1);
        CHECK(d(3, 2, 2) == 1);
        CHECK(d(2, 1, 2) == 1);
        CHECK(d(2, 3, 2) == 1);
        CHECK(d(2, 2, 1) == 1);
        CHECK(d(2, 2, 3) == 1);
    }
    SECTION("radius below the smallest spacing is identity") {
        Rng rng(5);
        const auto m = oracles::random_mask(rng, 8, 8, 8, Spacing{1, 1, 1}, 0.3);
        CHECK(dilate_ball(m, 0.49).data() == m.data());
    }
    SECTION("random masks match the all-pairs oracle") {
        Rng rng(17);
        for (int rep = 0; rep < 4; ++rep) {
            const Spacing sp = rep % 2 ? Spacing{0.7, 1.0, 1.4} : Spacing{1, 1, 1};
            const auto m = oracles::random_mask(rng, 12, 12, 12, sp, 0.08);
            const auto d = dilate_ball(m, 2.5);
            const auto ref = oracles::dilate_bruteforce(m, 2.5);
            REQUIRE(d.data() == ref.data());
        }
    }
}

TEST_CASE("dilation properties: extensive, monotone, translation covariant") {
    Rng rng(23);
    const auto m = oracles::random_mask(rng, 10, 10, 10, Spacing{1, 1, 1}, 0.1);
    const auto d1 = dilate_ball(m, 1.2);
    const auto d2 = dilate_ball(m, 2.4);
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i]) REQUIRE(d1[i]);   // extensive
        if (d1[i]) REQUIRE(d2[i]);  // monotone in radius
    }

    // translation: shift the mask by (1,1,1) inside a larger canvas
    BinaryMask big(13, 13, 13, Spacing{1, 1, 1});
    BinaryMask shifted(13, 13, 13, Spacing{1, 1, 1});
    for (std::size_t i = 0; i < m.size(); ++i) {
        const Voxel v = m.coord(i);
        if (m[i]) {
            big(v.x, v.y, v.z) = 1;
            shifted(v.x + 1, v.y + 1, v.z + 1) = 1;
        }
    }
    const auto db = dilate_ball(big, 1.5);
    const auto ds = dilate_ball(shifted, 1.5);
    for (int z = 0; z < 11; ++z)
        for (int y = 0; y < 11; ++y)
            for (int x = 0; x < 11; ++x)
                REQUIRE(db(x, y, z) == ds(x + 1, y + 1, z + 1));
}

TEST_CASE("distance transform examples") {
    SECTION("bar in a 1x1x5 volume: lateral border is adjacent background") {
        BinaryMask m(1, 1, 5, Spacing{1, 1, 1}, std::uint8_t{1});
        const auto d = distance_transform(m);
        for (int z = 0; z < 5; ++z) CHECK(d(0, 0, z) == Catch::Approx(1.0));
    }
    SECTION("all-foreground volume measures to the virtual outside") {
        BinaryMask m(5, 5, 5, Spacing{1, 1, 1}, std::uint8_t{1});
        const auto d = distance_transform(m);
        CHECK(d(2, 2, 2) == Catch::Approx(3.0)); // centre: 2 voxels + 1 to the virtual border
        CHECK(d(0, 0, 0) == Catch::Approx(1.0));
    }
    SECTION("background voxels map to zero") {
        BinaryMask m(3, 3, 3, Spacing{1, 1, 1});
        m(1, 1, 1) = 1;
        const auto d = distance_transform(m);
        CHECK(d(0, 0, 0) == 0.0);
        CHECK(d(1, 1, 1) == Catch::Approx(1.0));
    }
}

TEST_CASE("distance transform equals brute force on random masks") {
    Rng rng(31);
    for (int rep = 0; rep < 6; ++rep) {
        const Spacing sp = rep % 2 ? Spacing{0.514, 0.919, 1.25} : Spacing{1, 1, 1};
        const auto m = oracles::random_mask(rng, 10, 10, 10, sp, 0.5 + 0.07 * rep);
        const auto d = distance_transform(m);
        for (std::size_t i = 0; i < m.size(); ++i) {
            const double ref = oracles::edt_at_bruteforce(m, m.coord(i));
            REQUIRE(d[i] == Catch::Approx(ref).margin(1e-9));
        }
    }
}

TEST_CASE("boundary voxels") {
    SECTION("single voxel is its own boundary") {
        BinaryMask m(3, 3, 3, Spacing{1, 1, 1});
        m(1, 1, 1) = 1;
        const auto b = boundary_voxels(m);
        REQUIRE(b.size() == 1);
        CHECK(b[0] == Voxel{1, 1, 1});
    }
    SECTION("3^3 cube: all but the centre") {
        BinaryMask m(5, 5, 5, Spacing{1, 1, 1});
        for (int z = 1; z <= 3; ++z)
            for (int y = 1; y <= 3; ++y)
                for (int x = 1; x <= 3; ++x) m(x, y, z) = 1;
        CHECK(boundary_voxels(m).size() == 26);
    }
    SECTION("5^3 cube: 98 shell voxels") {
        BinaryMask m(7, 7, 7, Spacing{1, 1, 1});
        for (int z = 1; z <= 5; ++z)
            for (int y = 1; y <= 5; ++y)
                for (int x = 1; x <= 5; ++x) m(x, y, z) = 1;
        CHECK(boundary_voxels(m).size() == 98); // 5^3 - 3^3
    }
    SECTION("volume border counts as background") {
        BinaryMask m(3, 3, 3, Spacing{1, 1, 1}, std::uint8_t{1});
        CHECK(boundary_voxels(m).size() == 26); // all but the interior centre
    }
}
