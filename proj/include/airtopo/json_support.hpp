#ifndef AIRTOPO_JSON_SUPPORT_HPP
#define AIRTOPO_JSON_SUPPORT_HPP

#include <string>

#include <json.hpp>

#include "airtopo/metrics.hpp"
#include "airtopo/phantom.hpp"
#include "airtopo/repair.hpp"
#include "airtopo/skeleton.hpp"
#include "airtopo/version.hpp"

namespace airtopo {

// JSON report schemas and config parsing. Kept out of the algorithm headers
// so they stay free of the (heavy) json dependency.

using json = nlohmann::json;

inline json to_json(const Voxel& v) { return json::array({v.x, v.y, v.z}); }

inline json to_json(const RepairConfig& c) {
    return json{{"search_radius_mm", c.search_radius_mm},
                {"max_bend_deg", c.max_bend_deg},
                {"tangent_window_voxels", c.tangent_window_voxels},
                {"min_gap_voxels", c.min_gap_voxels},
                {"classifier_gate", c.classifier_gate ? "on" : "off-accept-all"},
                {"context_voxels", c.context_voxels}};
}

inline RepairConfig repair_config_from_json(const json& j) {
    RepairConfig c;
    c.search_radius_mm = j.value("search_radius_mm", c.search_radius_mm);
    c.max_bend_deg = j.value("max_bend_deg", c.max_bend_deg);
    c.tangent_window_voxels = j.value("tangent_window_voxels", c.tangent_window_voxels);
    c.min_gap_voxels = j.value("min_gap_voxels", c.min_gap_voxels);
    if (j.contains("classifier_gate"))
        c.classifier_gate = j.at("classifier_gate").get<std::string>() != "off-accept-all";
    c.context_voxels = j.value("context_voxels", c.context_voxels);
    c.validate();
    return c;
}

inline json to_json(const RepairReport& r) {
    json cands = json::array();
    for (const auto& c : r.candidates) {
        cands.push_back(json{{"endpoint", to_json(c.endpoint)},
                             {"target", to_json(c.target)},
                             {"gap_mm", c.gap_mm},
                             {"bend_deg", c.bend_deg},
                             {"label", to_string(c.label)},
                             {"accepted", c.accepted},
                             {"radius_mm", c.radius_mm}});
    }
    return json{{"schema_version", kReportSchemaVersion},
                {"config", to_json(r.config)},
                {"candidates", std::move(cands)},
                {"accepted_count", r.accepted_count},
                {"incorporated_count", r.incorporated_count},
                {"components_before", r.components_before},
                {"components_after", r.components_after}};
}

inline json to_json(const MetricsReport& r) {
    json j{{"schema_version", kReportSchemaVersion},
           {"definitions_version", r.definitions_version},
           {"dice", r.dice},
           {"tpr", r.tpr},
           {"fpr", r.fpr},
           {"ji", r.ji},
           {"hd_mm", r.hd_mm},
           {"td", r.td},
           {"td_mode", "gt_restricted"},
           {"td_paper_raw", r.td_paper_raw}};
    if (r.hd95_mm) j["hd95_mm"] = *r.hd95_mm;
    return j;
}

// Aligned text table with the column layout Dice, TPR, FPR (x10^-4), JI, HD,
// TD; FPR is scaled by 10^4 in this view only.
inline std::string metrics_table(const MetricsReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "%8s %8s %12s %8s %10s %8s\n"
                  "%8.4f %8.4f %12.4f %8.4f %10.2f %8.4f\n",
                  "Dice", "TPR", "FPR(x1e-4)", "JI", "HD", "TD", r.dice, r.tpr, r.fpr * 1e4,
                  r.ji, r.hd_mm, r.td);
    return buf;
}

inline json to_json(const SkeletonGraph& g) {
    json nodes = json::array();
    for (const auto& n : g.nodes)
        nodes.push_back(json{{"id", n.id},
                             {"xyz", to_json(n.pos)},
                             {"kind", to_string(n.kind)},
                             {"component", n.component}});
    json edges = json::array();
    for (const auto& e : g.edges) {
        json poly = json::array();
        for (const auto& v : e.polyline) poly.push_back(to_json(v));
        edges.push_back(json{{"a", e.a}, {"b", e.b}, {"length_mm", e.length_mm}, {"polyline", std::move(poly)}});
    }
    return json{{"schema_version", kReportSchemaVersion},
                {"component_count", g.component_count},
                {"nodes", std::move(nodes)},
                {"edges", std::move(edges)}};
}

inline PhantomSpec phantom_spec_from_json(const json& j) {
    PhantomSpec s;
    s.generations = j.value("generations", s.generations);
    s.root_radius_mm = j.value("root_radius_mm", s.root_radius_mm);
    s.radius_decay = j.value("radius_decay", s.radius_decay);
    s.branch_angle_deg = j.value("branch_angle_deg", s.branch_angle_deg);
    s.root_length_mm = j.value("root_length_mm", s.root_length_mm);
    s.length_decay = j.value("length_decay", s.length_decay);
    if (j.contains("dims")) {
        s.nx = j.at("dims").at(0).get<int>();
        s.ny = j.at("dims").at(1).get<int>();
        s.nz = j.at("dims").at(2).get<int>();
    }
    if (j.contains("spacing")) {
        s.spacing.dx = j.at("spacing").at(0).get<double>();
        s.spacing.dy = j.at("spacing").at(1).get<double>();
        s.spacing.dz = j.at("spacing").at(2).get<double>();
    }
    s.lumen_hu = j.value("lumen_hu", s.lumen_hu);
    s.wall_hu = j.value("wall_hu", s.wall_hu);
    s.background_hu = j.value("background_hu", s.background_hu);
    s.wall_thickness_mm = j.value("wall_thickness_mm", s.wall_thickness_mm);
    s.noise_sd_hu = j.value("noise_sd_hu", s.noise_sd_hu);
    s.seed = j.value("seed", s.seed);
    return s;
}

inline BreakSpec break_spec_from_json(const json& j) {
    BreakSpec b;
    b.seed = j.value("seed", b.seed);
    b.obstruction_mean_hu = j.value("obstruction_mean_hu", b.obstruction_mean_hu);
    b.obstruction_sd_hu = j.value("obstruction_sd_hu", b.obstruction_sd_hu);
    b.obstruction_fill_margin_mm = j.value("obstruction_fill_margin_mm", b.obstruction_fill_margin_mm);
    for (const auto& site : j.value("sites", json::array())) {
        BreakSite s;
        s.branch_id = site.at("branch").get<int>();
        s.center_fraction = site.value("center_fraction", 0.5);
        s.gap_voxels = site.value("gap_voxels", 2);
        const std::string kind = site.value("kind", "clean_gap");
        if (kind == "clean_gap") s.kind = BreakKind::clean_gap;
        else if (kind == "obstruction") s.kind = BreakKind::obstruction;
        else throw FormatError("break spec: unknown kind \"" + kind + "\"");
        b.sites.push_back(s);
    }
    return b;
}

inline json to_json(const std::vector<Branch>& branches) {
    json arr = json::array();
    for (const auto& b : branches)
        arr.push_back(json{{"id", b.id},
                           {"parent", b.parent},
                           {"generation", b.generation},
                           {"start_mm", json::array({b.start_mm.x, b.start_mm.y, b.start_mm.z})},
                           {"end_mm", json::array({b.end_mm.x, b.end_mm.y, b.end_mm.z})},
                           {"radius_mm", b.radius_mm}});
    return arr;
}

} // namespace airtopo

#endif // AIRTOPO_JSON_SUPPORT_HPP
