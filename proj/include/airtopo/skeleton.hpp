#ifndef AIRTOPO_SKELETON_HPP
#define AIRTOPO_SKELETON_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "airtopo/core.hpp"
#include "airtopo/morphology.hpp"

namespace airtopo {

// A binary mask that has been thinned to 1-voxel width.
struct SkeletonMask {
    BinaryMask mask;
};

namespace lee94 {

// Topology-preserving 3D thinning after Lee, Kashyap and Chu (1994), in the
// 6-subiteration boundary-direction formulation: per border direction,
// collect simple non-endpoint border voxels against the pre-pass state, then
// re-check sequentially while deleting. Deterministic raster scan order.
//
// The 3x3x3 neighbourhood is linearised x-fastest: idx = x + 3y + 9z for
// offsets shifted to {0,1,2}; the centre is 13.

inline const std::array<int, 256>& euler_lut() {
    static const std::array<int, 256> lut = [] {
        std::array<int, 256> t{};
        constexpr int odd[128] = {
            //  1    3    5    7    9   11   13   15
                1,  -1,  -1,   1,  -3,  -1,  -1,   1,
            // 17   19   21   23   25   27   29   31
               -1,   1,   1,  -1,   3,   1,   1,  -1,
            // 33   35   37   39   41   43   45   47
               -3,  -1,   3,   1,   1,  -1,   3,   1,
            // 49   51   53   55   57   59   61   63
               -1,   1,   1,  -1,   3,   1,   1,  -1,
            // 65   67   69   71   73   75   77   79
               -3,   3,  -1,   1,   1,   3,  -1,   1,
            // 81   83   85   87   89   91   93   95
               -1,   1,   1,  -1,   3,   1,   1,  -1,
            // 97   99  101  103  105  107  109  111
                1,   3,   3,   1,   5,   3,   3,   1,
            //113  115  117  119  121  123  125  127
               -1,   1,   1,  -1,   3,   1,   1,  -1,
            //129  131  133  135  137  139  141  143
               -7,  -1,  -1,   1,  -3,  -1,  -1,   1,
            //145  147  149  151  153  155  157  159
               -1,   1,   1,  -1,   3,   1,   1,  -1,
            //161  163  165  167  169  171  173  175
               -3,  -1,   3,   1,   1,  -1,   3,   1,
            //177  179  181  183  185  187  189  191
               -1,   1,   1,  -1,   3,   1,   1,  -1,
            //193  195  197  199  201  203  205  207
               -3,   3,  -1,   1,   1,   3,  -1,   1,
            //209  211  213  215  217  219  221  223
               -1,   1,   1,  -1,   3,   1,   1,  -1,
            //225  227  229  231  233  235  237  239
                1,   3,   3,   1,   5,   3,   3,   1,
            //241  243  245  247  249  251  253  255
               -1,   1,   1,  -1,   3,   1,   1,  -1};
        for (int i = 0; i < 128; ++i) t[2 * i + 1] = odd[i];
        return t;
    }();
    return lut;
}

// Neighbourhood indices contributing bits 128..2 for each of the 8 octants.
inline const int (&octant_bits())[8][7] {
    static const int bits[8][7] = {
        {24, 25, 15, 16, 21, 22, 12}, // SWU
        {26, 23, 17, 14, 25, 22, 16}, // SEU
        {18, 21, 9, 12, 19, 22, 10},  // NWU
        {20, 23, 19, 22, 11, 14, 10}, // NEU
        {6, 15, 7, 16, 3, 12, 4},     // SWB
        {8, 7, 17, 16, 5, 4, 14},     // SEB
        {0, 9, 3, 12, 1, 10, 4},      // NWB
        {2, 1, 11, 10, 5, 4, 14},     // NEB
    };
    return bits;
}

// Deleting the centre must not change the Euler characteristic of the
// neighbourhood; summed per octant from the LUT.
inline bool is_euler_invariant(const int nb[27]) {
    const auto& lut = euler_lut();
    const auto& bits = octant_bits();
    int euler = 0;
    for (int oct = 0; oct < 8; ++oct) {
        unsigned char n = 1;
        unsigned char bit = 128;
        for (int k = 0; k < 7; ++k, bit >>= 1)
            if (nb[bits[oct][k]]) n |= bit;
        euler += lut[n];
    }
    return euler == 0;
}

// Octant adjacency used by the N(v) labeling: for each octant (0-based),
// the member cube indices and the octants reachable through each member.
struct OctreeStep {
    int cube_index;
    std::array<int, 3> next; // 0-terminated list of octants (1-based), 0 = none
};

inline const std::array<std::array<OctreeStep, 7>, 8>& octree_adjacency() {
    static const std::array<std::array<OctreeStep, 7>, 8> adj = {{
        {{{0, {0, 0, 0}}, {1, {2, 0, 0}}, {3, {3, 0, 0}}, {4, {2, 3, 4}}, {9, {5, 0, 0}}, {10, {2, 5, 6}}, {12, {3, 5, 7}}}},
        {{{1, {1, 0, 0}}, {4, {1, 3, 4}}, {10, {1, 5, 6}}, {2, {0, 0, 0}}, {5, {4, 0, 0}}, {11, {6, 0, 0}}, {13, {4, 6, 8}}}},
        {{{3, {1, 0, 0}}, {4, {1, 2, 4}}, {12, {1, 5, 7}}, {6, {0, 0, 0}}, {7, {4, 0, 0}}, {14, {7, 0, 0}}, {15, {4, 7, 8}}}},
        {{{4, {1, 2, 3}}, {5, {2, 0, 0}}, {13, {2, 6, 8}}, {7, {3, 0, 0}}, {15, {3, 7, 8}}, {8, {0, 0, 0}}, {16, {8, 0, 0}}}},
        {{{9, {1, 0, 0}}, {10, {1, 2, 6}}, {12, {1, 3, 7}}, {17, {0, 0, 0}}, {18, {6, 0, 0}}, {20, {7, 0, 0}}, {21, {6, 7, 8}}}},
        {{{10, {1, 2, 5}}, {11, {2, 0, 0}}, {13, {2, 4, 8}}, {18, {5, 0, 0}}, {21, {5, 7, 8}}, {19, {0, 0, 0}}, {22, {8, 0, 0}}}},
        {{{12, {1, 3, 5}}, {14, {3, 0, 0}}, {15, {3, 4, 8}}, {20, {5, 0, 0}}, {21, {5, 6, 8}}, {23, {0, 0, 0}}, {24, {8, 0, 0}}}},
        {{{13, {2, 4, 6}}, {15, {3, 4, 7}}, {16, {4, 0, 0}}, {21, {5, 6, 7}}, {22, {6, 0, 0}}, {24, {7, 0, 0}}, {25, {0, 0, 0}}}},
    }};
    return adj;
}

inline void octree_label(int octant, int label, int cube[26]) {
    const auto& steps = octree_adjacency()[octant - 1];
    for (const auto& step : steps) {
        if (cube[step.cube_index] != 1) continue;
        cube[step.cube_index] = label;
        for (int nx : step.next) {
            if (nx == 0) break;
            octree_label(nx, label, cube);
        }
    }
}

// N(v) labeling from [Lee94]: the foreground of the 26-neighbourhood minus
// the centre must form exactly one connected component for the centre to be
// deletable. Zero components means the voxel is (or has just become) an
// isolated point; deleting it would drop a component, so it is not simple.
inline bool is_simple_point(const int nb[27]) {
    int cube[26];
    for (int i = 0; i < 13; ++i) cube[i] = nb[i];
    for (int i = 14; i < 27; ++i) cube[i - 1] = nb[i];

    static const int start_octant[26] = {
        1, 1, 2, 1, 1, 2, 3, 3, 4, 1, 1, 2, 1,
        2, 3, 3, 4, 5, 5, 6, 5, 5, 6, 7, 7, 8};

    int components = 0;
    for (int i = 0; i < 26; ++i) {
        if (cube[i] != 1) continue;
        ++components;
        if (components >= 2) return false;
        octree_label(start_octant[i], components + 1, cube);
    }
    return components == 1;
}

} // namespace lee94

namespace detail {

inline void gather_neighborhood(const BinaryMask& m, int x, int y, int z, int nb[27]) {
    int i = 0;
    for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx, ++i) {
                const int px = x + dx, py = y + dy, pz = z + dz;
                nb[i] = (m.in_bounds(px, py, pz) && m(px, py, pz)) ? 1 : 0;
            }
}

inline int count_neighbors_26(const BinaryMask& m, int x, int y, int z) {
    int n = 0;
    for (const auto& o : neighbor_offsets_26()) {
        const int px = x + o.x, py = y + o.y, pz = z + o.z;
        if (m.in_bounds(px, py, pz) && m(px, py, pz)) ++n;
    }
    return n;
}

} // namespace detail

// Thins a mask to a 1-voxel-wide skeleton while preserving per-component
// topology and protecting arc endpoints. Runs border subiterations in the
// fixed order N, S, E, W, U, B until a full round changes nothing.
inline SkeletonMask skeletonize(const BinaryMask& input) {
    BinaryMask m = input;
    static const Voxel borders[6] = {
        {0, -1, 0}, {0, 1, 0}, {1, 0, 0}, {-1, 0, 0}, {0, 0, 1}, {0, 0, -1}};

    std::vector<std::size_t> candidates;
    int nb[27];
    int unchanged_borders = 0;
    while (unchanged_borders < 6) {
        unchanged_borders = 0;
        for (const auto& border : borders) {
            candidates.clear();
            for (int z = 0; z < m.nz(); ++z) {
                for (int y = 0; y < m.ny(); ++y) {
                    for (int x = 0; x < m.nx(); ++x) {
                        if (!m(x, y, z)) continue;
                        const int bx = x + border.x, by = y + border.y, bz = z + border.z;
                        if (m.in_bounds(bx, by, bz) && m(bx, by, bz)) continue; // not this border
                        if (detail::count_neighbors_26(m, x, y, z) == 1) continue; // arc endpoint
                        detail::gather_neighborhood(m, x, y, z, nb);
                        if (!lee94::is_euler_invariant(nb)) continue;
                        if (!lee94::is_simple_point(nb)) continue;
                        candidates.push_back(m.index(x, y, z));
                    }
                }
            }
            // Sequential re-check: deletions earlier in the list can make a
            // later candidate non-simple.
            bool changed = false;
            for (const std::size_t idx : candidates) {
                const Voxel v = m.coord(idx);
                m[idx] = 0;
                detail::gather_neighborhood(m, v.x, v.y, v.z, nb);
                if (!lee94::is_simple_point(nb)) {
                    m[idx] = 1;
                } else {
                    changed = true;
                }
            }
            if (!changed) ++unchanged_borders;
        }
    }
    return SkeletonMask{std::move(m)};
}

// ---------------------------------------------------------------------------
// Centerline graph
// ---------------------------------------------------------------------------

enum class NodeKind { endpoint, branchpoint, isolated };

inline const char* to_string(NodeKind k) {
    switch (k) {
    case NodeKind::endpoint: return "endpoint";
    case NodeKind::branchpoint: return "branchpoint";
    case NodeKind::isolated: return "isolated";
    }
    return "?";
}

struct SkeletonNode {
    int id = -1;
    Voxel pos{};                 // representative voxel (smallest linear index)
    NodeKind kind = NodeKind::isolated;
    std::uint32_t component = 0; // 1-based component label of the skeleton
    std::vector<Voxel> voxels;   // all member voxels (one for endpoint/isolated)
};

struct SkeletonEdge {
    int a = -1;
    int b = -1;
    std::vector<Voxel> polyline; // ordered, inclusive of both attachment voxels
    double length_mm = 0.0;
};

struct SkeletonGraph {
    std::vector<SkeletonNode> nodes;
    std::vector<SkeletonEdge> edges;
    std::uint32_t component_count = 0;
    std::vector<std::uint32_t> voxel_component; // per voxel, 0 = not skeleton
    std::vector<std::int32_t> node_of_voxel;    // per voxel, -1 = not a node voxel
    std::vector<std::int32_t> edge_of_voxel;    // per voxel, chain interiors only, -1 otherwise
    std::vector<std::int32_t> edge_pos_of_voxel; // position within that edge's polyline
    std::vector<std::vector<int>> incident_edges; // per node id

    // Returns the edge polyline oriented so it starts at `node`'s attachment
    // voxel.
    std::vector<Voxel> polyline_from(int edge_id, int node) const {
        const SkeletonEdge& e = edges[edge_id];
        std::vector<Voxel> p = e.polyline;
        const bool starts_here = (e.a == node);
        if (!starts_here) std::reverse(p.begin(), p.end());
        return p;
    }
};

inline double polyline_length_mm(const std::vector<Voxel>& p, const Spacing& s) {
    double len = 0.0;
    for (std::size_t i = 1; i < p.size(); ++i)
        len += voxel_distance_mm(p[i - 1], p[i], s);
    return len;
}

// Converts a skeleton mask into an explicit graph. Node classification uses
// the 26-neighbour count: 1 -> endpoint, 0 -> isolated, >= 3 -> branchpoint.
// Maximal 26-connected clusters of branchpoint voxels form a single
// branchpoint node, so messy digital junctions do not masquerade as cycles.
// Components made only of degree-2 voxels (rings) get their smallest-index
// voxel designated as a branchpoint node carrying a self-loop edge.
inline SkeletonGraph build_graph(const SkeletonMask& skel) {
    const BinaryMask& m = skel.mask;
    SkeletonGraph g;

    const ComponentLabeling comps = connected_components(m);
    g.component_count = comps.count;
    g.voxel_component = comps.labels;
    g.node_of_voxel.assign(m.size(), -1);
    g.edge_of_voxel.assign(m.size(), -1);
    g.edge_pos_of_voxel.assign(m.size(), -1);

    std::vector<std::int8_t> degree(m.size(), -1);
    for (std::size_t i = 0; i < m.size(); ++i)
        if (m[i]) {
            const Voxel v = m.coord(i);
            degree[i] = static_cast<std::int8_t>(detail::count_neighbors_26(m, v.x, v.y, v.z));
        }

    const auto& offs = neighbor_offsets_26();

    auto add_node = [&](Voxel pos, NodeKind kind, std::vector<Voxel> voxels) {
        SkeletonNode n;
        n.id = static_cast<int>(g.nodes.size());
        n.pos = pos;
        n.kind = kind;
        n.component = g.voxel_component[m.index(pos)];
        n.voxels = std::move(voxels);
        for (const auto& v : n.voxels) g.node_of_voxel[m.index(v)] = n.id;
        g.nodes.push_back(std::move(n));
        return g.nodes.back().id;
    };

    // Pass 1: nodes, in raster order of their first voxel.
    std::vector<std::size_t> cluster_stack;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (!m[i] || g.node_of_voxel[i] != -1) continue;
        if (degree[i] == 0) {
            add_node(m.coord(i), NodeKind::isolated, {m.coord(i)});
        } else if (degree[i] == 1) {
            add_node(m.coord(i), NodeKind::endpoint, {m.coord(i)});
        } else if (degree[i] >= 3) {
            // flood the branchpoint cluster
            std::vector<Voxel> members;
            cluster_stack.assign(1, i);
            g.node_of_voxel[i] = -2; // provisional mark
            while (!cluster_stack.empty()) {
                const std::size_t cur = cluster_stack.back();
                cluster_stack.pop_back();
                members.push_back(m.coord(cur));
                const Voxel c = m.coord(cur);
                for (const auto& o : offs) {
                    const int x = c.x + o.x, y = c.y + o.y, z = c.z + o.z;
                    if (!m.in_bounds(x, y, z)) continue;
                    const std::size_t ni = m.index(x, y, z);
                    if (m[ni] && degree[ni] >= 3 && g.node_of_voxel[ni] == -1) {
                        g.node_of_voxel[ni] = -2;
                        cluster_stack.push_back(ni);
                    }
                }
            }
            std::sort(members.begin(), members.end(), [&](const Voxel& a, const Voxel& b) {
                return m.index(a) < m.index(b);
            });
            const Voxel rep = members.front();
            add_node(rep, NodeKind::branchpoint, std::move(members));
        }
    }

    // Pass 1b: designate a node in components that have none (pure rings).
    {
        std::vector<std::uint8_t> has_node(comps.count + 1, 0);
        for (const auto& n : g.nodes) has_node[n.component] = 1;
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (!m[i]) continue;
            const std::uint32_t c = g.voxel_component[i];
            if (!has_node[c]) {
                add_node(m.coord(i), NodeKind::branchpoint, {m.coord(i)});
                has_node[c] = 1;
            }
        }
    }

    // Pass 2: trace chains of degree-2 voxels between node voxels.
    std::vector<std::uint8_t> chain_visited(m.size(), 0);
    g.incident_edges.assign(g.nodes.size(), {});

    auto is_node_voxel = [&](std::size_t idx) { return g.node_of_voxel[idx] >= 0; };

    auto emit_edge = [&](int a, int b, std::vector<Voxel> polyline) {
        SkeletonEdge e;
        e.a = a;
        e.b = b;
        e.length_mm = polyline_length_mm(polyline, m.spacing());
        e.polyline = std::move(polyline);
        const int id = static_cast<int>(g.edges.size());
        for (std::size_t k = 1; k + 1 < e.polyline.size(); ++k) {
            const std::size_t vi = m.index(e.polyline[k]);
            g.edge_of_voxel[vi] = id;
            g.edge_pos_of_voxel[vi] = static_cast<std::int32_t>(k);
        }
        g.edges.push_back(std::move(e));
        g.incident_edges[a].push_back(id);
        if (b != a) g.incident_edges[b].push_back(id);
    };

    // A chain whose two ends attach to the same branchpoint cluster and whose
    // interior hugs that cluster is a digital junction artifact, not a
    // handle; fold it into the node instead of emitting a self-loop.
    auto absorb_into_node = [&](int node, const std::vector<Voxel>& interior) {
        SkeletonNode& n = g.nodes[node];
        for (const auto& v : interior) {
            g.node_of_voxel[m.index(v)] = node;
            n.voxels.push_back(v);
        }
    };

    for (std::size_t node_idx = 0; node_idx < g.nodes.size(); ++node_idx) {
        // nodes may grow voxels during absorption; index loop stays valid
        for (std::size_t vi = 0; vi < g.nodes[node_idx].voxels.size(); ++vi) {
            const Voxel v = g.nodes[node_idx].voxels[vi];
            for (const auto& o : offs) {
                const int x = v.x + o.x, y = v.y + o.y, z = v.z + o.z;
                if (!m.in_bounds(x, y, z) || !m(x, y, z)) continue;
                const std::size_t ni = m.index(x, y, z);

                if (is_node_voxel(ni)) {
                    const int other = g.node_of_voxel[ni];
                    const int self = static_cast<int>(node_idx);
                    if (other == self) continue; // same cluster, internal adjacency
                    if (other > self) emit_edge(self, other, {v, {x, y, z}});
                    continue;
                }
                if (chain_visited[ni]) continue;

                // walk the degree-2 chain
                std::vector<Voxel> polyline{v, {x, y, z}};
                chain_visited[ni] = 1;
                Voxel prev = v;
                Voxel cur = {x, y, z};
                while (!is_node_voxel(m.index(cur))) {
                    Voxel next{};
                    bool found = false;
                    for (const auto& o2 : offs) {
                        const int qx = cur.x + o2.x, qy = cur.y + o2.y, qz = cur.z + o2.z;
                        if (!m.in_bounds(qx, qy, qz) || !m(qx, qy, qz)) continue;
                        if (Voxel{qx, qy, qz} == prev) continue;
                        next = {qx, qy, qz};
                        found = true;
                        break;
                    }
                    if (!found) break; // chain terminates (cannot happen on valid degrees)
                    prev = cur;
                    cur = next;
                    polyline.push_back(cur);
                    if (!is_node_voxel(m.index(cur))) chain_visited[m.index(cur)] = 1;
                }

                const std::size_t endi = m.index(cur);
                const int self = static_cast<int>(node_idx);
                if (!is_node_voxel(endi)) {
                    // Ring walked back into its own chain; close as self-loop.
                    emit_edge(self, self, std::move(polyline));
                    continue;
                }
                const int other = g.node_of_voxel[endi];
                if (other == self && g.nodes[self].kind == NodeKind::branchpoint) {
                    bool hugs_cluster = true;
                    for (std::size_t k = 1; k + 1 < polyline.size(); ++k) {
                        bool adj = false;
                        const Voxel& p = polyline[k];
                        for (const auto& o2 : offs) {
                            const int qx = p.x + o2.x, qy = p.y + o2.y, qz = p.z + o2.z;
                            if (!m.in_bounds(qx, qy, qz)) continue;
                            const std::size_t qi = m.index(qx, qy, qz);
                            if (g.node_of_voxel[qi] == self) {
                                adj = true;
                                break;
                            }
                        }
                        if (!adj) {
                            hugs_cluster = false;
                            break;
                        }
                    }
                    if (hugs_cluster) {
                        absorb_into_node(self, std::vector<Voxel>(polyline.begin() + 1, polyline.end() - 1));
                        continue;
                    }
                }
                emit_edge(self, other, std::move(polyline));
            }
        }
    }

    return g;
}

// Independent cycles in the contracted graph (cyclomatic number). Zero means
// the skeleton is a forest.
inline int cycle_count(const SkeletonGraph& g) {
    return static_cast<int>(g.edges.size()) - static_cast<int>(g.nodes.size()) +
           static_cast<int>(g.component_count);
}

inline bool is_forest(const SkeletonGraph& g) { return cycle_count(g) == 0; }

// Sum of all edge lengths of the contracted graph, in mm.
inline double total_centerline_length(const SkeletonMask& skel) {
    const SkeletonGraph g = build_graph(skel);
    double total = 0.0;
    for (const auto& e : g.edges) total += e.length_mm;
    return total;
}

// Removes leaf edges shorter than min_mm that hang off a branchpoint. The
// branchpoint-side attachment voxel stays. Off by default in the CLI; one
// pass only.
inline SkeletonMask prune_short_spurs(const SkeletonMask& skel, double min_mm) {
    const SkeletonGraph g = build_graph(skel);
    BinaryMask m = skel.mask;
    for (const auto& e : g.edges) {
        if (e.a == e.b || e.length_mm >= min_mm) continue;
        const NodeKind ka = g.nodes[e.a].kind;
        const NodeKind kb = g.nodes[e.b].kind;
        int leaf = -1;
        if (ka == NodeKind::endpoint && kb == NodeKind::branchpoint) leaf = e.a;
        else if (kb == NodeKind::endpoint && ka == NodeKind::branchpoint) leaf = e.b;
        if (leaf < 0) continue;
        auto poly = g.polyline_from(static_cast<int>(&e - g.edges.data()), leaf);
        // drop everything but the branchpoint attachment voxel
        for (std::size_t i = 0; i + 1 < poly.size(); ++i) m(poly[i]) = 0;
    }
    return SkeletonMask{std::move(m)};
}

} // namespace airtopo

#endif // AIRTOPO_SKELETON_HPP
