#ifndef AIRTOPO_REPAIR_HPP
#define AIRTOPO_REPAIR_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "airtopo/classifier.hpp"
#include "airtopo/core.hpp"
#include "airtopo/morphology.hpp"
#include "airtopo/profile.hpp"
#include "airtopo/skeleton.hpp"
#include "airtopo/union_find.hpp"

namespace airtopo {

// Discontinuity detection and reconnection: enumerate skeleton-endpoint
// candidates within a search radius, rank by distance then bend angle,
// accept greedily under an acyclicity constraint, gate through the profile
// classifier, and rasterize accepted links dilated to the local airway
// diameter.

struct RepairConfig {
    double search_radius_mm = 10.0;
    double max_bend_deg = 60.0;
    int tangent_window_voxels = 5;
    // candidates closer than this (Chebyshev, voxels) are not treated as a
    // discontinuity; 1 only rules out the endpoint voxel itself
    int min_gap_voxels = 1;
    bool classifier_gate = true; // false = accept-all (no model consulted)
    int context_voxels = kDefaultContextVoxels;

    void validate() const {
        if (!(search_radius_mm > 0.0))
            throw ContractError("repair config: search radius must be positive");
        if (!(max_bend_deg > 0.0) || max_bend_deg > 180.0)
            throw ContractError("repair config: max bend must be in (0, 180]");
        if (tangent_window_voxels < 2)
            throw ContractError("repair config: tangent window must be >= 2");
        if (min_gap_voxels < 0)
            throw ContractError("repair config: min gap must be >= 0");
    }
};

enum class ConnectionLabel : std::uint8_t {
    true_airway = 0,
    parenchyma = 1,
    obstruction = 2,
    unclassified = 3,
};

inline const char* to_string(ConnectionLabel l) {
    switch (l) {
    case ConnectionLabel::true_airway: return "true_airway";
    case ConnectionLabel::parenchyma: return "parenchyma";
    case ConnectionLabel::obstruction: return "obstruction";
    case ConnectionLabel::unclassified: return "unclassified";
    }
    return "?";
}

struct CandidateConnection {
    int endpoint_node = -1;
    Voxel endpoint{};
    Voxel target{};
    double gap_mm = 0.0;
    double bend_deg = 0.0; // 0 for isolated tips, whose angle test is disabled
    std::vector<Voxel> path;
    double radius_mm = 0.0;
    ConnectionLabel label = ConnectionLabel::unclassified;
    bool accepted = false;
};

struct EndpointTangent {
    Vec3 direction{}; // unit vector pointing out of the branch, mm space
    bool valid = false;
};

// Direction of continuation at an endpoint: from the mean position of up to
// `window` polyline voxels walking inward from the tip, toward the tip.
// Isolated tips have no polyline and return an invalid tangent, which
// disables the angle test for them.
inline EndpointTangent endpoint_tangent(const SkeletonGraph& graph, int node, int window,
                                        const Spacing& spacing) {
    const SkeletonNode& n = graph.nodes[static_cast<std::size_t>(node)];
    if (n.kind != NodeKind::endpoint && n.kind != NodeKind::isolated)
        throw ContractError("endpoint_tangent: node is not an endpoint");
    if (n.kind == NodeKind::isolated || graph.incident_edges[static_cast<std::size_t>(node)].empty())
        return {};

    const auto poly = graph.polyline_from(graph.incident_edges[static_cast<std::size_t>(node)].front(), node);
    Vec3 mean{};
    int count = 0;
    for (std::size_t i = 1; i < poly.size() && static_cast<int>(i) <= window; ++i) {
        mean = mean + voxel_to_mm(poly[i], spacing);
        ++count;
    }
    if (count == 0) return {};
    mean = mean * (1.0 / count);
    const Vec3 dir = (voxel_to_mm(poly[0], spacing) - mean).normalized();
    return {dir, true};
}

// 3D integer line from a to b, inclusive, 26-connected; DDA along the
// dominant axis with round-half-away-from-zero.
inline std::vector<Voxel> rasterize_path(const Voxel& a, const Voxel& b) {
    if (a == b)
        throw ContractError("rasterize_path: endpoints coincide");
    const int n = std::max({std::abs(b.x - a.x), std::abs(b.y - a.y), std::abs(b.z - a.z)});
    std::vector<Voxel> path;
    path.reserve(static_cast<std::size_t>(n) + 1);
    for (int s = 0; s <= n; ++s) {
        path.push_back(Voxel{
            a.x + static_cast<int>(std::llround(static_cast<double>(b.x - a.x) * s / n)),
            a.y + static_cast<int>(std::llround(static_cast<double>(b.y - a.y) * s / n)),
            a.z + static_cast<int>(std::llround(static_cast<double>(b.z - a.z) * s / n))});
    }
    return path;
}

// Dilation radius for an accepted connection: mean of the distance-field
// radii at the two attachment voxels, clamped below so the connection is at
// least one voxel thick.
inline double connection_radius(const Voxel& a, const Voxel& b, const DistanceField& dist) {
    const double ra = dist(a);
    const double rb = dist(b);
    if (ra <= 0.0 || rb <= 0.0)
        throw ContractError("connection_radius: attachment voxel lies on background");
    return std::max(0.5 * (ra + rb), dist.spacing().max_component());
}

// Enumerates, filters and sorts candidate connections. For every endpoint or
// isolated node: all skeleton voxels within the search radius, excluding the
// tip itself, voxels of the tip's own edge within the tangent window, and
// anything closer than min_gap_voxels; candidates bending more than
// max_bend_deg away from the tip tangent are dropped. Sorted by
// (gap, bend, target index, endpoint node).
inline std::vector<CandidateConnection> find_candidates(const SkeletonGraph& graph,
                                                        const SkeletonMask& skel,
                                                        const RepairConfig& config) {
    config.validate();
    const BinaryMask& m = skel.mask;
    const Spacing sp = m.spacing();
    const int rx = static_cast<int>(std::ceil(config.search_radius_mm / sp.dx));
    const int ry = static_cast<int>(std::ceil(config.search_radius_mm / sp.dy));
    const int rz = static_cast<int>(std::ceil(config.search_radius_mm / sp.dz));

    std::vector<CandidateConnection> out;

    for (const auto& node : graph.nodes) {
        if (node.kind != NodeKind::endpoint && node.kind != NodeKind::isolated) continue;
        const Voxel tip = node.pos;
        const EndpointTangent tangent =
            endpoint_tangent(graph, node.id, config.tangent_window_voxels, sp);

        // voxels of the tip's own edge inside the tangent window
        std::vector<std::size_t> own;
        if (!graph.incident_edges[static_cast<std::size_t>(node.id)].empty()) {
            const auto poly = graph.polyline_from(
                graph.incident_edges[static_cast<std::size_t>(node.id)].front(), node.id);
            for (std::size_t i = 1; i < poly.size() && static_cast<int>(i) <= config.tangent_window_voxels; ++i)
                own.push_back(m.index(poly[i]));
        }

        const Vec3 tip_mm = voxel_to_mm(tip, sp);
        for (int dz = -rz; dz <= rz; ++dz) {
            for (int dy = -ry; dy <= ry; ++dy) {
                for (int dx = -rx; dx <= rx; ++dx) {
                    const Voxel t{tip.x + dx, tip.y + dy, tip.z + dz};
                    if (!m.in_bounds(t) || !m(t)) continue;
                    if (t == tip) continue;
                    const int cheb = std::max({std::abs(dx), std::abs(dy), std::abs(dz)});
                    if (cheb < config.min_gap_voxels) continue;
                    const double gap = voxel_distance_mm(tip, t, sp);
                    if (gap > config.search_radius_mm) continue;
                    const std::size_t ti = m.index(t);
                    if (std::find(own.begin(), own.end(), ti) != own.end()) continue;

                    double bend = 0.0;
                    if (tangent.valid) {
                        const Vec3 d = (voxel_to_mm(t, sp) - tip_mm).normalized();
                        const double c = std::clamp(tangent.direction.dot(d), -1.0, 1.0);
                        bend = std::acos(c) * 180.0 / M_PI;
                        if (bend > config.max_bend_deg) continue;
                    }

                    CandidateConnection cand;
                    cand.endpoint_node = node.id;
                    cand.endpoint = tip;
                    cand.target = t;
                    cand.gap_mm = gap;
                    cand.bend_deg = bend;
                    cand.path = rasterize_path(tip, t);
                    out.push_back(std::move(cand));
                }
            }
        }
    }

    std::sort(out.begin(), out.end(), [&](const CandidateConnection& a, const CandidateConnection& b) {
        if (a.gap_mm != b.gap_mm) return a.gap_mm < b.gap_mm;
        if (a.bend_deg != b.bend_deg) return a.bend_deg < b.bend_deg;
        const std::size_t ia = m.index(a.target), ib = m.index(b.target);
        if (ia != ib) return ia < ib;
        return a.endpoint_node < b.endpoint_node;
    });
    return out;
}

// Greedy sweep over the sorted candidates: a candidate is accepted iff its
// two sides still lie in different connected components of the skeleton plus
// all previously accepted connections (union-find over component labels),
// and its endpoint has not already been consumed. Targets are not consumed;
// acyclicity is what bounds the fan-in. Returns the number accepted.
inline std::size_t select_connections(std::vector<CandidateConnection>& candidates,
                                      const SkeletonGraph& graph, const SkeletonMask& skel) {
    UnionFind uf(graph.component_count + 1);
    std::vector<std::uint8_t> consumed(graph.nodes.size(), 0);
    std::size_t accepted = 0;
    for (auto& cand : candidates) {
        cand.accepted = false;
        if (consumed[static_cast<std::size_t>(cand.endpoint_node)]) continue;
        const std::uint32_t comp_a = graph.nodes[static_cast<std::size_t>(cand.endpoint_node)].component;
        const std::uint32_t comp_b = graph.voxel_component[skel.mask.index(cand.target)];
        if (!uf.unite(comp_a, comp_b)) continue;
        cand.accepted = true;
        consumed[static_cast<std::size_t>(cand.endpoint_node)] = 1;
        ++accepted;
    }
    return accepted;
}

struct RepairReport {
    RepairConfig config{};
    std::vector<CandidateConnection> candidates;
    std::size_t accepted_count = 0;
    std::size_t incorporated_count = 0;
    std::uint32_t components_before = 0;
    std::uint32_t components_after = 0;
};

struct RepairResult {
    BinaryMask repaired;
    RepairReport report;
};

// The full stage-2/stage-3 pipeline. With the classifier gate on, each
// accepted connection's intensity profile is classified and only true_airway
// links are written into the mask; rejected links stay in the report. With
// the gate off every accepted connection is incorporated unclassified.
inline RepairResult repair_mask(const BinaryMask& mask, const Volume3D& volume,
                                const RepairConfig& config, const ClassifierModel* model) {
    require_same_geometry(mask, volume, "repair_mask");
    config.validate();
    if (config.classifier_gate && model == nullptr)
        throw ContractError("repair_mask: model required while the classifier gate is on");

    RepairResult result{mask, {}};
    RepairReport& report = result.report;
    report.config = config;
    report.components_before = connected_components(mask).count;

    const SkeletonMask skel = skeletonize(mask);
    const SkeletonGraph graph = build_graph(skel);
    const DistanceField dist = distance_transform(mask);

    report.candidates = find_candidates(graph, skel, config);
    for (auto& cand : report.candidates)
        cand.radius_mm = connection_radius(cand.endpoint, cand.target, dist);
    report.accepted_count = select_connections(report.candidates, graph, skel);

    BinaryMask& out = result.repaired;
    for (auto& cand : report.candidates) {
        if (!cand.accepted) continue;
        if (config.classifier_gate) {
            const auto ctx_path = profile_context_path(graph, skel.mask, cand.endpoint_node,
                                                       cand.path, config.context_voxels);
            auto profile = extract_profile(volume, ctx_path);
            const Classification cls = classify(*model, profile);
            cand.label = static_cast<ConnectionLabel>(cls.label);
            if (cls.label != ClassLabel::true_airway) continue;
        }
        ++report.incorporated_count;
        const auto ball = detail::ball_offsets(cand.radius_mm, mask.spacing());
        for (const auto& v : cand.path) {
            for (const auto& o : ball) {
                const int x = v.x + o.x, y = v.y + o.y, z = v.z + o.z;
                if (out.in_bounds(x, y, z)) out(x, y, z) = 1;
            }
        }
    }

    report.components_after = connected_components(out).count;
    return result;
}

} // namespace airtopo

#endif // AIRTOPO_REPAIR_HPP
