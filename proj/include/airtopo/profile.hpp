#ifndef AIRTOPO_PROFILE_HPP
#define AIRTOPO_PROFILE_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "airtopo/core.hpp"
#include "airtopo/morphology.hpp"
#include "airtopo/rng.hpp"
#include "airtopo/skeleton.hpp"

namespace airtopo {

// 1D intensity profiles along centerline paths: the classifier's input.
// Profiles are resampled to a fixed length and normalized from the CT window
// [-1000, 400] HU into [0, 1].

constexpr int kProfileLength = 64;
constexpr double kHuWindowLow = -1000.0;
constexpr double kHuWindowHigh = 400.0;
constexpr int kDefaultContextVoxels = 16;

enum class Provenance : std::uint8_t { extracted, synthesized };

enum class ClassLabel : std::uint8_t {
    true_airway = 0,
    parenchyma = 1,
    obstruction = 2,
};

inline const char* to_string(ClassLabel l) {
    switch (l) {
    case ClassLabel::true_airway: return "true_airway";
    case ClassLabel::parenchyma: return "parenchyma";
    case ClassLabel::obstruction: return "obstruction";
    }
    return "?";
}

struct IntensityProfile {
    std::array<float, kProfileLength> samples{};
    Provenance provenance = Provenance::extracted;
    std::vector<Voxel> source_path;
};

inline double normalize_hu(double hu) {
    const double clamped = std::min(kHuWindowHigh, std::max(kHuWindowLow, hu));
    return (clamped - kHuWindowLow) / (kHuWindowHigh - kHuWindowLow);
}

namespace detail {

// Trilinear interpolation at a continuous voxel-space coordinate, clamped to
// the valid cell range so positions on the outer half-voxel rim still sample
// sensibly.
inline double sample_trilinear(const Volume3D& vol, double vx, double vy, double vz) {
    const auto clamp = [](double v, double hi) { return std::min(std::max(v, 0.0), hi); };
    vx = clamp(vx, static_cast<double>(vol.nx() - 1));
    vy = clamp(vy, static_cast<double>(vol.ny() - 1));
    vz = clamp(vz, static_cast<double>(vol.nz() - 1));
    const int x0 = std::min(static_cast<int>(vx), vol.nx() - 2 >= 0 ? vol.nx() - 2 : 0);
    const int y0 = std::min(static_cast<int>(vy), vol.ny() - 2 >= 0 ? vol.ny() - 2 : 0);
    const int z0 = std::min(static_cast<int>(vz), vol.nz() - 2 >= 0 ? vol.nz() - 2 : 0);
    const int x1 = std::min(x0 + 1, vol.nx() - 1);
    const int y1 = std::min(y0 + 1, vol.ny() - 1);
    const int z1 = std::min(z0 + 1, vol.nz() - 1);
    const double fx = vx - x0, fy = vy - y0, fz = vz - z0;

    const double c000 = vol(x0, y0, z0), c100 = vol(x1, y0, z0);
    const double c010 = vol(x0, y1, z0), c110 = vol(x1, y1, z0);
    const double c001 = vol(x0, y0, z1), c101 = vol(x1, y0, z1);
    const double c011 = vol(x0, y1, z1), c111 = vol(x1, y1, z1);

    const double c00 = c000 + (c100 - c000) * fx;
    const double c10 = c010 + (c110 - c010) * fx;
    const double c01 = c001 + (c101 - c001) * fx;
    const double c11 = c011 + (c111 - c011) * fx;
    const double c0 = c00 + (c10 - c00) * fy;
    const double c1 = c01 + (c11 - c01) * fy;
    return c0 + (c1 - c0) * fz;
}

} // namespace detail

// Resamples trilinear-interpolated HU uniformly by arc length along the
// voxel path (piecewise-linear through voxel centres in mm space) to exactly
// kProfileLength samples, then windows and normalizes.
inline IntensityProfile extract_profile(const Volume3D& vol, const std::vector<Voxel>& path) {
    if (path.empty())
        throw ContractError("extract_profile: empty path");
    for (const auto& v : path)
        if (!vol.in_bounds(v))
            throw ContractError("extract_profile: path exits volume bounds");

    const Spacing sp = vol.spacing();
    std::vector<double> arc(path.size(), 0.0);
    for (std::size_t i = 1; i < path.size(); ++i)
        arc[i] = arc[i - 1] + voxel_distance_mm(path[i - 1], path[i], sp);
    const double total = arc.back();

    IntensityProfile prof;
    prof.provenance = Provenance::extracted;
    prof.source_path = path;

    std::size_t seg = 0;
    for (int k = 0; k < kProfileLength; ++k) {
        Vec3 pos;
        if (total == 0.0 || path.size() == 1) {
            pos = voxel_to_mm(path[0], sp);
        } else {
            const double t = std::min(total * k / (kProfileLength - 1), total);
            while (seg + 2 < path.size() && arc[seg + 1] < t) ++seg;
            const double span = arc[seg + 1] - arc[seg];
            const double alpha = span > 0.0 ? (t - arc[seg]) / span : 0.0;
            const Vec3 a = voxel_to_mm(path[seg], sp);
            const Vec3 b = voxel_to_mm(path[seg + 1], sp);
            pos = a + (b - a) * alpha;
        }
        const double hu = detail::sample_trilinear(vol, pos.x / sp.dx, pos.y / sp.dy, pos.z / sp.dz);
        prof.samples[static_cast<std::size_t>(k)] = static_cast<float>(normalize_hu(hu));
    }
    return prof;
}

// Extends a gap path with skeleton context on both sides: up to
// `context_voxels` voxels walking inward along the endpoint's own edge, and
// the same along the target's edge, choosing the target-side direction that
// best continues the gap. The result is spatially ordered from deep inside
// side A, across the gap, to deep inside side B.
inline std::vector<Voxel> profile_context_path(const SkeletonGraph& graph,
                                               const BinaryMask& skel_mask,
                                               int endpoint_node,
                                               const std::vector<Voxel>& gap_path,
                                               int context_voxels) {
    if (gap_path.size() < 2)
        throw ContractError("profile_context_path: gap path needs two ends");
    const Voxel tip = gap_path.front();
    const Voxel target = gap_path.back();

    std::vector<Voxel> result;

    // side A: walk inward from the endpoint tip
    {
        std::vector<Voxel> inward;
        const auto& inc = graph.incident_edges[static_cast<std::size_t>(endpoint_node)];
        if (!inc.empty()) {
            const auto poly = graph.polyline_from(inc.front(), endpoint_node);
            for (std::size_t i = 1; i < poly.size() && static_cast<int>(i) <= context_voxels; ++i)
                inward.push_back(poly[i]);
        }
        result.assign(inward.rbegin(), inward.rend());
    }

    result.insert(result.end(), gap_path.begin(), gap_path.end());

    // side B: continue past the target along its own edge (or, for a node
    // target, along the incident edge that best continues the gap direction)
    {
        const Spacing sp = skel_mask.spacing();
        const Vec3 gap_dir = (voxel_to_mm(target, sp) - voxel_to_mm(tip, sp)).normalized();
        const std::size_t ti = skel_mask.index(target);
        std::vector<Voxel> onward;

        if (graph.node_of_voxel[ti] >= 0) {
            const int tnode = graph.node_of_voxel[ti];
            double best = -2.0;
            int best_edge = -1;
            for (int eid : graph.incident_edges[static_cast<std::size_t>(tnode)]) {
                const auto poly = graph.polyline_from(eid, tnode);
                if (poly.size() < 2) continue;
                const Vec3 d = (voxel_to_mm(poly[1], sp) - voxel_to_mm(poly[0], sp)).normalized();
                const double dot = gap_dir.dot(d);
                if (dot > best) {
                    best = dot;
                    best_edge = eid;
                }
            }
            if (best_edge >= 0) {
                const auto poly = graph.polyline_from(best_edge, tnode);
                for (std::size_t i = 1; i < poly.size() && static_cast<int>(i) <= context_voxels; ++i)
                    onward.push_back(poly[i]);
            }
        } else if (graph.edge_of_voxel[ti] >= 0) {
            const auto& e = graph.edges[static_cast<std::size_t>(graph.edge_of_voxel[ti])];
            const int pos = graph.edge_pos_of_voxel[ti];
            const int n = static_cast<int>(e.polyline.size());
            // pick the direction whose first step best continues the gap
            double fwd = -2.0, bwd = -2.0;
            if (pos + 1 < n)
                fwd = gap_dir.dot((voxel_to_mm(e.polyline[pos + 1], sp) - voxel_to_mm(target, sp)).normalized());
            if (pos - 1 >= 0)
                bwd = gap_dir.dot((voxel_to_mm(e.polyline[pos - 1], sp) - voxel_to_mm(target, sp)).normalized());
            if (fwd >= bwd) {
                for (int i = pos + 1; i < n && i - pos <= context_voxels; ++i)
                    onward.push_back(e.polyline[static_cast<std::size_t>(i)]);
            } else {
                for (int i = pos - 1; i >= 0 && pos - i <= context_voxels; --i)
                    onward.push_back(e.polyline[static_cast<std::size_t>(i)]);
            }
        }
        result.insert(result.end(), onward.begin(), onward.end());
    }
    return result;
}

// ---------------------------------------------------------------------------
// Training-set synthesis
// ---------------------------------------------------------------------------

struct TrainingSet {
    std::vector<IntensityProfile> profiles;
    std::vector<ClassLabel> labels;

    std::size_t size() const { return profiles.size(); }
};

struct SynthesisConfig {
    int min_subpath_voxels = 24;
    int max_subpath_voxels = 48;
    double parenchyma_margin_mm = 2.0; // keep-out dilation around the gt mask
    double obstruction_mean_hu = 0.0;
    double obstruction_sd_hu = 50.0;
    double obstruction_window_min = 0.2; // fraction of profile length
    double obstruction_window_max = 0.6;
};

// Builds a three-class training set from a ground-truth mask and its CT:
//   true_airway  - profiles along random subpaths of the gt skeleton,
//   parenchyma   - profiles along random straight segments fully outside the
//                  dilated gt mask,
//   obstruction  - the true_airway profiles with a contiguous window
//                  replaced by soft-tissue-level values.
// Deterministic for a given seed.
inline TrainingSet synthesize_training_set(const BinaryMask& gt_mask, const Volume3D& volume,
                                           std::size_t per_class, std::uint64_t seed,
                                           const SynthesisConfig& cfg = {}) {
    require_same_geometry(gt_mask, volume, "synthesize_training_set");
    Rng rng(seed);

    const SkeletonMask skel = skeletonize(gt_mask);
    const SkeletonGraph graph = build_graph(skel);

    // usable skeleton subpath sources: edges, weighted by polyline size
    std::vector<const SkeletonEdge*> edges;
    std::vector<double> cumweight;
    double wsum = 0.0;
    for (const auto& e : graph.edges) {
        if (static_cast<int>(e.polyline.size()) >= cfg.min_subpath_voxels / 2) {
            edges.push_back(&e);
            wsum += static_cast<double>(e.polyline.size());
            cumweight.push_back(wsum);
        }
    }
    if (edges.empty())
        throw GenerationError("synthesize_training_set: no usable skeleton paths for class true_airway");

    TrainingSet set;
    set.profiles.reserve(per_class * 3);
    set.labels.reserve(per_class * 3);

    auto pick_edge = [&]() -> const SkeletonEdge* {
        const double r = rng.uniform(0.0, wsum);
        const auto it = std::lower_bound(cumweight.begin(), cumweight.end(), r);
        return edges[static_cast<std::size_t>(it - cumweight.begin())];
    };

    // true_airway
    for (std::size_t i = 0; i < per_class; ++i) {
        const SkeletonEdge* e = pick_edge();
        const int n = static_cast<int>(e->polyline.size());
        const int maxlen = std::min(cfg.max_subpath_voxels, n);
        const int minlen = std::min(cfg.min_subpath_voxels, maxlen);
        const int len = static_cast<int>(rng.uniform_int(minlen, maxlen));
        const int start = static_cast<int>(rng.uniform_int(0, n - len));
        std::vector<Voxel> path(e->polyline.begin() + start, e->polyline.begin() + start + len);
        IntensityProfile p = extract_profile(volume, path);
        p.provenance = Provenance::synthesized;
        set.profiles.push_back(std::move(p));
        set.labels.push_back(ClassLabel::true_airway);
    }

    // parenchyma: straight segments clear of the dilated gt mask
    {
        const BinaryMask keepout = dilate_ball(gt_mask, cfg.parenchyma_margin_mm);
        const Spacing sp = volume.spacing();
        std::size_t made = 0;
        std::size_t attempts = 0;
        const std::size_t max_attempts = 20000 * std::max<std::size_t>(per_class, 1);
        while (made < per_class) {
            if (++attempts > max_attempts)
                throw GenerationError("synthesize_training_set: cannot place samples for class parenchyma");
            const int len = static_cast<int>(rng.uniform_int(cfg.min_subpath_voxels,
                                                             cfg.max_subpath_voxels));
            const Voxel start{static_cast<int>(rng.uniform_int(0, volume.nx() - 1)),
                              static_cast<int>(rng.uniform_int(0, volume.ny() - 1)),
                              static_cast<int>(rng.uniform_int(0, volume.nz() - 1))};
            const Vec3 dir = rng.unit_vector();
            const Voxel end{
                start.x + static_cast<int>(std::lround(dir.x * (len - 1) * sp.min_component() / sp.dx)),
                start.y + static_cast<int>(std::lround(dir.y * (len - 1) * sp.min_component() / sp.dy)),
                start.z + static_cast<int>(std::lround(dir.z * (len - 1) * sp.min_component() / sp.dz))};
            if (!volume.in_bounds(end) || end == start) continue;

            std::vector<Voxel> path;
            bool ok = true;
            // straight voxel segment via integer interpolation
            const int steps = std::max({std::abs(end.x - start.x), std::abs(end.y - start.y),
                                        std::abs(end.z - start.z)});
            for (int s = 0; s <= steps; ++s) {
                const Voxel v{start.x + (end.x - start.x) * s / std::max(steps, 1),
                              start.y + (end.y - start.y) * s / std::max(steps, 1),
                              start.z + (end.z - start.z) * s / std::max(steps, 1)};
                if (!volume.in_bounds(v) || keepout(v)) {
                    ok = false;
                    break;
                }
                if (path.empty() || !(path.back() == v)) path.push_back(v);
            }
            if (!ok || path.size() < 2) continue;
            IntensityProfile p = extract_profile(volume, path);
            p.provenance = Provenance::synthesized;
            set.profiles.push_back(std::move(p));
            set.labels.push_back(ClassLabel::parenchyma);
            ++made;
        }
    }

    // obstruction: corrupted copies of this run's true_airway profiles
    for (std::size_t i = 0; i < per_class; ++i) {
        IntensityProfile p = set.profiles[i];
        p.provenance = Provenance::synthesized;
        const int wmin = static_cast<int>(cfg.obstruction_window_min * kProfileLength) + 1;
        const int wmax = static_cast<int>(cfg.obstruction_window_max * kProfileLength);
        const int w = static_cast<int>(rng.uniform_int(wmin, wmax));
        const int start = static_cast<int>(rng.uniform_int(0, kProfileLength - w));
        for (int k = start; k < start + w; ++k) {
            const double hu = rng.normal(cfg.obstruction_mean_hu, cfg.obstruction_sd_hu);
            p.samples[static_cast<std::size_t>(k)] = static_cast<float>(normalize_hu(hu));
        }
        set.profiles.push_back(std::move(p));
        set.labels.push_back(ClassLabel::obstruction);
    }

    return set;
}

// Flat binary fixture format: kProfileLength float32 samples then one label
// byte, per record.
inline void save_training_set(const TrainingSet& set, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError(path + ": cannot open for writing");
    for (std::size_t i = 0; i < set.size(); ++i) {
        out.write(reinterpret_cast<const char*>(set.profiles[i].samples.data()),
                  kProfileLength * sizeof(float));
        const auto label = static_cast<std::uint8_t>(set.labels[i]);
        out.write(reinterpret_cast<const char*>(&label), 1);
    }
    if (!out)
        throw IoError(path + ": write failed");
}

inline TrainingSet load_training_set(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError(path + ": cannot open");
    TrainingSet set;
    constexpr std::size_t record = kProfileLength * sizeof(float) + 1;
    in.seekg(0, std::ios::end);
    const auto bytes = static_cast<std::size_t>(in.tellg());
    in.seekg(0, std::ios::beg);
    if (bytes % record != 0)
        throw FormatError(path + ": size is not a whole number of profile records");
    const std::size_t n = bytes / record;
    for (std::size_t i = 0; i < n; ++i) {
        IntensityProfile p;
        p.provenance = Provenance::synthesized;
        in.read(reinterpret_cast<char*>(p.samples.data()), kProfileLength * sizeof(float));
        std::uint8_t label = 0;
        in.read(reinterpret_cast<char*>(&label), 1);
        if (!in)
            throw FormatError(path + ": truncated record");
        if (label > 2)
            throw FormatError(path + ": label byte out of range");
        set.profiles.push_back(std::move(p));
        set.labels.push_back(static_cast<ClassLabel>(label));
    }
    return set;
}

} // namespace airtopo

#endif // AIRTOPO_PROFILE_HPP
