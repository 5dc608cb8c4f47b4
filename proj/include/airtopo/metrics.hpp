#ifndef AIRTOPO_METRICS_HPP
#define AIRTOPO_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "airtopo/core.hpp"
#include "airtopo/morphology.hpp"
#include "airtopo/skeleton.hpp"

namespace airtopo {

// Voxel-level and topology-level evaluation of a (prediction, ground truth)
// mask pair: Dice, TPR, FPR, JI, Hausdorff distance and tree detected rate.

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    std::size_t total() const { return tp + fp + fn + tn; }
};

inline ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& gt) {
    require_same_geometry(pred, gt, "confusion");
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] != 0;
        const bool g = gt[i] != 0;
        if (p && g) ++c.tp;
        else if (p && !g) ++c.fp;
        else if (!p && g) ++c.fn;
        else ++c.tn;
    }
    return c;
}

// Degenerate denominators return their conventional limits: Dice/JI of two
// empty masks is 1, TPR against an empty ground truth is 1, FPR with no
// background is 0.

inline double dice(const ConfusionCounts& c) {
    const double den = 2.0 * static_cast<double>(c.tp) + static_cast<double>(c.fp) + static_cast<double>(c.fn);
    return den == 0.0 ? 1.0 : 2.0 * static_cast<double>(c.tp) / den;
}

inline double tpr(const ConfusionCounts& c) {
    const double den = static_cast<double>(c.tp) + static_cast<double>(c.fn);
    return den == 0.0 ? 1.0 : static_cast<double>(c.tp) / den;
}

inline double fpr(const ConfusionCounts& c) {
    const double den = static_cast<double>(c.fp) + static_cast<double>(c.tn);
    return den == 0.0 ? 0.0 : static_cast<double>(c.fp) / den;
}

inline double jaccard(const ConfusionCounts& c) {
    const double den = static_cast<double>(c.tp) + static_cast<double>(c.fp) + static_cast<double>(c.fn);
    return den == 0.0 ? 1.0 : static_cast<double>(c.tp) / den;
}

namespace detail {

// Distance from every voxel to the nearest voxel of `set`, in mm. No virtual
// border here: only the given set is a distance source.
inline DistanceField distance_to_voxel_set(const std::vector<Voxel>& set, int nx, int ny, int nz,
                                           const Spacing& sp) {
    const double big = (nx * sp.dx + ny * sp.dy + nz * sp.dz) + 1.0;
    DistanceField field(nx, ny, nz, sp, big);
    auto& g = field.data();
    for (const auto& v : set) g[field.index(v)] = 0.0;

    // x pass: two-sided linear scan, then square
    for (int z = 0; z < nz; ++z) {
        for (int y = 0; y < ny; ++y) {
            double carry = big;
            for (int x = 0; x < nx; ++x) {
                const std::size_t i = field.index(x, y, z);
                if (g[i] == 0.0) carry = 0.0;
                else carry = std::min(g[i], carry + sp.dx);
                g[i] = carry;
            }
            carry = big;
            for (int x = nx - 1; x >= 0; --x) {
                const std::size_t i = field.index(x, y, z);
                if (g[i] == 0.0) carry = 0.0;
                else carry = std::min(g[i], carry + sp.dx);
                g[i] = std::min(g[i], carry);
                g[i] = g[i] * g[i];
            }
        }
    }

    std::vector<int> vbuf;
    std::vector<double> zbuf;
    {   // y pass
        std::vector<double> pos(static_cast<std::size_t>(ny)), f(static_cast<std::size_t>(ny)),
            query(static_cast<std::size_t>(ny)), res(static_cast<std::size_t>(ny));
        for (int y = 0; y < ny; ++y) pos[static_cast<std::size_t>(y)] = query[static_cast<std::size_t>(y)] = y * sp.dy;
        for (int z = 0; z < nz; ++z)
            for (int x = 0; x < nx; ++x) {
                for (int y = 0; y < ny; ++y) f[static_cast<std::size_t>(y)] = g[field.index(x, y, z)];
                envelope_1d(pos, f, query, res, vbuf, zbuf);
                for (int y = 0; y < ny; ++y) g[field.index(x, y, z)] = res[static_cast<std::size_t>(y)];
            }
    }
    {   // z pass
        std::vector<double> pos(static_cast<std::size_t>(nz)), f(static_cast<std::size_t>(nz)),
            query(static_cast<std::size_t>(nz)), res(static_cast<std::size_t>(nz));
        for (int z = 0; z < nz; ++z) pos[static_cast<std::size_t>(z)] = query[static_cast<std::size_t>(z)] = z * sp.dz;
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                for (int z = 0; z < nz; ++z) f[static_cast<std::size_t>(z)] = g[field.index(x, y, z)];
                envelope_1d(pos, f, query, res, vbuf, zbuf);
                for (int z = 0; z < nz; ++z) g[field.index(x, y, z)] = res[static_cast<std::size_t>(z)];
            }
    }
    for (auto& v : g) v = std::sqrt(v);
    return field;
}

inline double directed_percentile(std::vector<double> d, double q) {
    if (d.empty()) return 0.0;
    std::sort(d.begin(), d.end());
    const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(d.size())));
    return d[std::max<std::size_t>(rank, 1) - 1];
}

} // namespace detail

// Full (100th percentile) symmetric Hausdorff distance between the boundary
// voxel sets of the two masks, anisotropic mm metric.
inline double hausdorff(const BinaryMask& pred, const BinaryMask& gt) {
    require_same_geometry(pred, gt, "hausdorff");
    const auto bp = boundary_voxels(pred);
    const auto bg = boundary_voxels(gt);
    if (bp.empty() || bg.empty())
        throw ContractError("hausdorff: undefined for an empty mask");

    const auto dist_to_gt = detail::distance_to_voxel_set(bg, pred.nx(), pred.ny(), pred.nz(), pred.spacing());
    const auto dist_to_pred = detail::distance_to_voxel_set(bp, pred.nx(), pred.ny(), pred.nz(), pred.spacing());

    double h = 0.0;
    for (const auto& v : bp) h = std::max(h, dist_to_gt(v));
    for (const auto& v : bg) h = std::max(h, dist_to_pred(v));
    return h;
}

// 95th-percentile variant (nearest-rank per direction, then symmetric max).
// Reported only on request, never in place of the full Hausdorff.
inline double hausdorff95(const BinaryMask& pred, const BinaryMask& gt) {
    require_same_geometry(pred, gt, "hausdorff95");
    const auto bp = boundary_voxels(pred);
    const auto bg = boundary_voxels(gt);
    if (bp.empty() || bg.empty())
        throw ContractError("hausdorff95: undefined for an empty mask");

    const auto dist_to_gt = detail::distance_to_voxel_set(bg, pred.nx(), pred.ny(), pred.nz(), pred.spacing());
    const auto dist_to_pred = detail::distance_to_voxel_set(bp, pred.nx(), pred.ny(), pred.nz(), pred.spacing());

    std::vector<double> da, db;
    da.reserve(bp.size());
    db.reserve(bg.size());
    for (const auto& v : bp) da.push_back(dist_to_gt(v));
    for (const auto& v : bg) db.push_back(dist_to_pred(v));
    return std::max(detail::directed_percentile(std::move(da), 0.95),
                    detail::directed_percentile(std::move(db), 0.95));
}

enum class TdMode {
    paper_raw,     // prediction centerline length / ground-truth centerline length
    gt_restricted, // numerator counts only predicted centerline inside gt dilated by 1 voxel
};

// Tree detected rate. The raw ratio can exceed 1 and rewards false branches;
// the gt-restricted variant only credits predicted centerline that runs
// inside the (1-voxel dilated) ground truth.
inline double tree_detected_rate(const BinaryMask& pred, const BinaryMask& gt, TdMode mode) {
    require_same_geometry(pred, gt, "tree_detected_rate");
    const SkeletonMask gt_skel = skeletonize(gt);
    const double gt_len = total_centerline_length(gt_skel);
    if (gt_len <= 0.0)
        throw ContractError("tree_detected_rate: ground-truth skeleton is empty");

    SkeletonMask pred_skel = skeletonize(pred);
    if (mode == TdMode::gt_restricted) {
        const BinaryMask allowed = dilate_voxels(gt, 1);
        for (std::size_t i = 0; i < pred_skel.mask.size(); ++i)
            if (pred_skel.mask[i] && !allowed[i]) pred_skel.mask[i] = 0;
    }
    return total_centerline_length(pred_skel) / gt_len;
}

struct MetricsReport {
    double dice = 0.0;
    double tpr = 0.0;
    double fpr = 0.0;
    double ji = 0.0;
    double hd_mm = 0.0;
    double td = 0.0;           // gt_restricted, the default mode
    double td_paper_raw = 0.0;
    std::optional<double> hd95_mm;
    std::string definitions_version = "metrics-v1";
};

// Computes the whole suite on the masks as given (largest-component
// preselection is the caller's policy).
inline MetricsReport evaluate(const BinaryMask& pred, const BinaryMask& gt, bool with_hd95 = false) {
    require_same_geometry(pred, gt, "evaluate");
    const ConfusionCounts c = confusion(pred, gt);
    MetricsReport r;
    r.dice = dice(c);
    r.tpr = tpr(c);
    r.fpr = fpr(c);
    r.ji = jaccard(c);
    r.hd_mm = hausdorff(pred, gt);
    r.td = tree_detected_rate(pred, gt, TdMode::gt_restricted);
    r.td_paper_raw = tree_detected_rate(pred, gt, TdMode::paper_raw);
    if (with_hd95) r.hd95_mm = hausdorff95(pred, gt);
    return r;
}

} // namespace airtopo

#endif // AIRTOPO_METRICS_HPP
