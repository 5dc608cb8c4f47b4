#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "airtopo/phantom.hpp"
#include "airtopo/rng.hpp"
#include "airtopo/skeleton.hpp"
#include "oracles.hpp"

using namespace airtopo;

namespace {

BinaryMask line_mask(int n, Voxel start, Voxel step, int canvas = 24, Spacing sp = {1, 1, 1}) {
    BinaryMask m(canvas, canvas, canvas, sp);
    Voxel v = start;
    for (int i = 0; i < n; ++i) {
        m(v) = 1;
        v = {v.x + step.x, v.y + step.y, v.z + step.z};
    }
    return m;
}

int count_26_neighbors(const BinaryMask& m, const Voxel& v) {
    int n = 0;
    for (const auto& o : neighbor_offsets_26()) {
        const int x = v.x + o.x, y = v.y + o.y, z = v.z + o.z;
        if (m.in_bounds(x, y, z) && m(x, y, z)) ++n;
    }
    return n;
}

} // namespace

TEST_CASE("already-thin inputs are fixpoints of thinning") {
    SECTION("straight 10-voxel line") {
        const auto m = line_mask(10, {4, 4, 4}, {1, 0, 0});
        CHECK(skeletonize(m).mask.data() == m.data());
    }
    SECTION("single voxel") {
        BinaryMask m(5, 5, 5, Spacing{1, 1, 1});
        m(2, 2, 2) = 1;
        CHECK(skeletonize(m).mask.data() == m.data());
    }
    SECTION("diagonal line") {
        const auto m = line_mask(8, {2, 2, 2}, {1, 1, 0});
        CHECK(skeletonize(m).mask.data() == m.data());
    }
}

TEST_CASE("a solid tube thins to its axis with two endpoints") {
    // axis-aligned tube, radius 3, length 30, along z
    BinaryMask m(16, 16, 36, Spacing{1, 1, 1});
    for (int z = 3; z < 33; ++z)
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x)
                if ((x - 8) * (x - 8) + (y - 8) * (y - 8) <= 9) m(x, y, z) = 1;

    const SkeletonMask skel = skeletonize(m);
    REQUIRE(count_foreground(skel.mask) > 0);

    int endpoints = 0;
    for (std::size_t i = 0; i < skel.mask.size(); ++i) {
        if (!skel.mask[i]) continue;
        const Voxel v = skel.mask.coord(i);
        // every skeleton voxel lies within 1.5 voxels of the analytic axis
        const double r = std::hypot(v.x - 8.0, v.y - 8.0);
        REQUIRE(r <= 1.5);
        if (count_26_neighbors(skel.mask, v) == 1) ++endpoints;
    }
    CHECK(endpoints == 2);
}

TEST_CASE("thinning preserves component count and is idempotent") {
    Rng rng(71);
    for (int rep = 0; rep < 5; ++rep) {
        // blobby masks: dilated random seeds
        BinaryMask seeds(14, 14, 14, Spacing{1, 1, 1});
        for (int k = 0; k < 12; ++k)
            seeds(static_cast<int>(rng.uniform_int(1, 12)), static_cast<int>(rng.uniform_int(1, 12)),
                  static_cast<int>(rng.uniform_int(1, 12))) = 1;
        const BinaryMask m = dilate_ball(seeds, 1.6);

        const auto before = connected_components(m);
        const SkeletonMask s1 = skeletonize(m);
        const auto after = connected_components(s1.mask);
        REQUIRE(after.count == before.count);

        // subset of the input
        for (std::size_t i = 0; i < m.size(); ++i)
            if (s1.mask[i]) REQUIRE(m[i]);

        // idempotent
        const SkeletonMask s2 = skeletonize(s1.mask);
        REQUIRE(s2.mask.data() == s1.mask.data());
    }
}

TEST_CASE("thinning preserves component count on random noise masks") {
    Rng rng(72);
    for (int rep = 0; rep < 5; ++rep) {
        const auto m = oracles::random_mask(rng, 12, 12, 12, Spacing{1, 1, 1}, 0.2);
        const auto s = skeletonize(m);
        REQUIRE(connected_components(s.mask).count == connected_components(m).count);
        REQUIRE(skeletonize(s.mask).mask.data() == s.mask.data());
    }
}

TEST_CASE("graph of a straight 5-voxel line") {
    const auto m = line_mask(5, {4, 4, 4}, {1, 0, 0});
    const auto g = build_graph(SkeletonMask{m});
    REQUIRE(g.nodes.size() == 2);
    CHECK(g.nodes[0].kind == NodeKind::endpoint);
    CHECK(g.nodes[1].kind == NodeKind::endpoint);
    REQUIRE(g.edges.size() == 1);
    CHECK(g.edges[0].polyline.size() == 5);
    CHECK(g.edges[0].length_mm == Catch::Approx(4.0));
    CHECK(g.component_count == 1);
    CHECK(is_forest(g));
}

TEST_CASE("graph of a Y shape") {
    BinaryMask m(24, 24, 24, Spacing{1, 1, 1});
    const Voxel j{10, 10, 10};
    m(j) = 1;
    for (int i = 1; i <= 4; ++i) {
        m(10, 10 - i, 10) = 1;      // north arm
        m(10 + i, 10 + i, 10) = 1;  // south-east arm
        m(10 - i, 10 + i, 10) = 1;  // south-west arm
    }
    const auto g = build_graph(SkeletonMask{m});
    int endpoints = 0, branchpoints = 0;
    for (const auto& n : g.nodes) {
        if (n.kind == NodeKind::endpoint) ++endpoints;
        if (n.kind == NodeKind::branchpoint) ++branchpoints;
    }
    CHECK(endpoints == 3);
    CHECK(branchpoints == 1);
    CHECK(g.edges.size() == 3);
    CHECK(is_forest(g));
}

TEST_CASE("edge lengths match a per-step oracle on hand-built trees") {
    // zigzag: 4 straight + 3 diagonal steps in the xy plane
    BinaryMask m(24, 24, 24, Spacing{0.5, 1.0, 1.5});
    std::vector<Voxel> path{{2, 2, 2}};
    for (int i = 0; i < 4; ++i) path.push_back({path.back().x + 1, path.back().y, path.back().z});
    for (int i = 0; i < 3; ++i) path.push_back({path.back().x + 1, path.back().y + 1, path.back().z});
    for (const auto& v : path) m(v) = 1;

    double expected = 0.0;
    for (std::size_t i = 1; i < path.size(); ++i)
        expected += voxel_distance_mm(path[i - 1], path[i], m.spacing());

    CHECK(total_centerline_length(SkeletonMask{m}) == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("total centerline length examples") {
    SECTION("empty skeleton") {
        BinaryMask m(4, 4, 4, Spacing{1, 1, 1});
        CHECK(total_centerline_length(SkeletonMask{m}) == 0.0);
    }
    SECTION("5-voxel line at unit spacing") {
        const auto m = line_mask(5, {3, 3, 3}, {0, 1, 0});
        CHECK(total_centerline_length(SkeletonMask{m}) == Catch::Approx(4.0));
    }
    SECTION("3-voxel xy diagonal") {
        const auto m = line_mask(3, {3, 3, 3}, {1, 1, 0});
        CHECK(total_centerline_length(SkeletonMask{m}) == Catch::Approx(2.0 * std::sqrt(2.0)));
    }
}

TEST_CASE("every endpoint reported has exactly one skeleton neighbor") {
    PhantomSpec spec;
    spec.generations = 3;
    const Phantom ph = generate_phantom(spec);
    const SkeletonMask skel = skeletonize(ph.gt_mask);
    const SkeletonGraph g = build_graph(skel);
    for (const auto& n : g.nodes) {
        if (n.kind == NodeKind::endpoint)
            REQUIRE(count_26_neighbors(skel.mask, n.pos) == 1);
        if (n.kind == NodeKind::isolated)
            REQUIRE(count_26_neighbors(skel.mask, n.pos) == 0);
    }
}

TEST_CASE("every skeleton voxel is accounted for by nodes and polylines") {
    PhantomSpec spec;
    spec.generations = 4;
    const Phantom ph = generate_phantom(spec);
    const SkeletonMask skel = skeletonize(ph.gt_mask);
    const SkeletonGraph g = build_graph(skel);

    std::set<std::size_t> covered;
    for (const auto& n : g.nodes)
        for (const auto& v : n.voxels) covered.insert(skel.mask.index(v));
    for (const auto& e : g.edges)
        for (const auto& v : e.polyline) covered.insert(skel.mask.index(v));
    for (std::size_t i = 0; i < skel.mask.size(); ++i)
        REQUIRE((skel.mask[i] != 0) == (covered.count(i) > 0));

    // interior chain voxels belong to exactly one edge
    std::set<std::size_t> interior;
    for (const auto& e : g.edges)
        for (std::size_t k = 1; k + 1 < e.polyline.size(); ++k) {
            const auto idx = skel.mask.index(e.polyline[k]);
            REQUIRE(interior.insert(idx).second);
        }
}

TEST_CASE("a ring is reported as one cycle, not a forest") {
    // 6x6 square ring, one voxel wide, in a single z-slice
    BinaryMask m(10, 10, 3, Spacing{1, 1, 1});
    for (int i = 1; i <= 6; ++i) {
        m(i, 1, 1) = 1;
        m(i, 6, 1) = 1;
        m(1, i, 1) = 1;
        m(6, i, 1) = 1;
    }
    const auto g = build_graph(SkeletonMask{m});
    CHECK(g.component_count == 1);
    CHECK(cycle_count(g) == 1);
    CHECK_FALSE(is_forest(g));
}

TEST_CASE("isolated voxels become isolated nodes") {
    BinaryMask m(6, 6, 6, Spacing{1, 1, 1});
    m(1, 1, 1) = 1;
    m(4, 4, 4) = 1;
    const auto g = build_graph(SkeletonMask{m});
    REQUIRE(g.nodes.size() == 2);
    CHECK(g.nodes[0].kind == NodeKind::isolated);
    CHECK(g.nodes[1].kind == NodeKind::isolated);
    CHECK(g.edges.empty());
    CHECK(g.component_count == 2);
    CHECK(is_forest(g));
}

TEST_CASE("short spur pruning removes only qualifying leaf edges") {
    // long line with a 3-voxel spur hanging off the middle; the first spur
    // voxel touches two line voxels diagonally and so belongs to the
    // junction cluster, which pruning keeps
    BinaryMask m(24, 24, 24, Spacing{1, 1, 1});
    for (int x = 2; x <= 16; ++x) m(x, 10, 10) = 1;
    m(9, 11, 10) = 1;
    m(9, 12, 10) = 1;
    m(9, 13, 10) = 1;

    const SkeletonMask skel{m};
    const auto pruned = prune_short_spurs(skel, 3.5);
    CHECK(count_foreground(pruned.mask) == 16);
    CHECK(pruned.mask(9, 13, 10) == 0);
    CHECK(pruned.mask(9, 12, 10) == 0);
    CHECK(pruned.mask(9, 11, 10) == 1);

    // too-small threshold keeps everything
    const auto kept = prune_short_spurs(skel, 1.0);
    CHECK(kept.mask.data() == m.data());
}

TEST_CASE("phantom skeleton length stays within 5% of the analytic polyline") {
    for (const int gens : {2, 3, 4}) {
        PhantomSpec spec;
        spec.generations = gens;
        const Phantom ph = generate_phantom(spec);
        double analytic = 0.0;
        for (const auto& b : ph.branches) analytic += (b.end_mm - b.start_mm).norm();
        const double measured = total_centerline_length(skeletonize(ph.gt_mask));
        INFO("generations=" << gens << " analytic=" << analytic << " measured=" << measured);
        CHECK(std::abs(measured - analytic) / analytic <= 0.05);
    }
}
