#ifndef AIRTOPO_PHANTOM_HPP
#define AIRTOPO_PHANTOM_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "airtopo/core.hpp"
#include "airtopo/rng.hpp"

namespace airtopo {

// Deterministic synthetic airway-tree phantoms: a binary-branching tree of
// capsule tubes rendered as lumen/wall/background HU, with analytically
// known centerlines. The test bed for repair and metrics.

struct PhantomSpec {
    int generations = 4;
    double root_radius_mm = 2.5;
    double radius_decay = 0.7;
    double branch_angle_deg = 35.0;
    double root_length_mm = 22.0;
    double length_decay = 0.75;
    int nx = 64, ny = 64, nz = 64;
    Spacing spacing{1.0, 1.0, 1.0};
    double lumen_hu = -950.0;
    double wall_hu = 0.0;
    double background_hu = -850.0;
    double wall_thickness_mm = 1.0;
    double noise_sd_hu = 0.0; // additive Gaussian HU noise, 0 = off
    std::uint64_t seed = 0;

    void validate() const {
        if (generations < 1)
            throw ContractError("phantom: generations must be >= 1");
        if (!(root_radius_mm > 0.0) || !(radius_decay > 0.0))
            throw ContractError("phantom: radii must be positive");
        if (!(root_length_mm > 0.0) || !(length_decay > 0.0))
            throw ContractError("phantom: lengths must be positive");
        if (!spacing.valid())
            throw ContractError("phantom: invalid spacing");
    }
};

struct Branch {
    int id = 0;
    int parent = -1; // -1 for the root
    int generation = 0;
    Vec3 start_mm{};
    Vec3 end_mm{};
    double radius_mm = 0.0;
};

struct Phantom {
    Volume3D volume;
    BinaryMask gt_mask;
    std::vector<Branch> branches;
};

namespace detail {

inline double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
    const Vec3 ab = b - a;
    const double len2 = ab.dot(ab);
    double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Vec3 closest = a + ab * t;
    return (p - closest).norm();
}

// Paints all voxels within `radius` of the segment. Returns nothing; the
// predicate decides what to write.
template <typename F>
void paint_capsule(const Vec3& a, const Vec3& b, double radius, const Spacing& sp,
                   int nx, int ny, int nz, F&& write) {
    const double lox = std::min(a.x, b.x) - radius, hix = std::max(a.x, b.x) + radius;
    const double loy = std::min(a.y, b.y) - radius, hiy = std::max(a.y, b.y) + radius;
    const double loz = std::min(a.z, b.z) - radius, hiz = std::max(a.z, b.z) + radius;
    const int x0 = std::max(0, static_cast<int>(std::floor(lox / sp.dx)));
    const int x1 = std::min(nx - 1, static_cast<int>(std::ceil(hix / sp.dx)));
    const int y0 = std::max(0, static_cast<int>(std::floor(loy / sp.dy)));
    const int y1 = std::min(ny - 1, static_cast<int>(std::ceil(hiy / sp.dy)));
    const int z0 = std::max(0, static_cast<int>(std::floor(loz / sp.dz)));
    const int z1 = std::min(nz - 1, static_cast<int>(std::ceil(hiz / sp.dz)));
    for (int z = z0; z <= z1; ++z)
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const Vec3 p = voxel_to_mm(Voxel{x, y, z}, sp);
                if (point_segment_distance(p, a, b) <= radius) write(x, y, z);
            }
}

} // namespace detail

// Builds the branch table: binary branching, children rotated +-angle inside
// the plane spanned by the parent direction and its in-plane axis, with the
// branching plane itself rotating 90 degrees each generation.
inline std::vector<Branch> phantom_branch_table(const PhantomSpec& spec) {
    spec.validate();

    struct Frame {
        Branch branch;
        Vec3 dir, plane_axis;
    };

    const Vec3 start{spec.nx * spec.spacing.dx / 2.0, spec.ny * spec.spacing.dy / 2.0,
                     spec.root_radius_mm + spec.wall_thickness_mm + spec.spacing.dz};

    std::vector<Frame> frontier;
    std::vector<Branch> branches;
    {
        Frame root;
        root.dir = {0.0, 0.0, 1.0};
        root.plane_axis = {1.0, 0.0, 0.0};
        root.branch.id = 0;
        root.branch.parent = -1;
        root.branch.generation = 0;
        root.branch.start_mm = start;
        root.branch.end_mm = start + root.dir * spec.root_length_mm;
        root.branch.radius_mm = spec.root_radius_mm;
        branches.push_back(root.branch);
        frontier.push_back(root);
    }

    const double theta = spec.branch_angle_deg * M_PI / 180.0;
    for (int gen = 1; gen < spec.generations; ++gen) {
        std::vector<Frame> next;
        const double len = spec.root_length_mm * std::pow(spec.length_decay, gen);
        const double rad = spec.root_radius_mm * std::pow(spec.radius_decay, gen);
        for (const auto& f : frontier) {
            for (const int side : {-1, +1}) {
                Frame child;
                child.dir = (f.dir * std::cos(theta) + f.plane_axis * (side * std::sin(theta))).normalized();
                child.plane_axis = f.dir.cross(f.plane_axis).normalized();
                child.branch.id = static_cast<int>(branches.size());
                child.branch.parent = f.branch.id;
                child.branch.generation = gen;
                child.branch.start_mm = f.branch.end_mm;
                child.branch.end_mm = f.branch.end_mm + child.dir * len;
                child.branch.radius_mm = rad;
                branches.push_back(child.branch);
                next.push_back(child);
            }
        }
        frontier = std::move(next);
    }

    // the whole tree, including walls, must fit inside the volume
    const double margin = spec.wall_thickness_mm;
    const double ext_x = (spec.nx - 1) * spec.spacing.dx;
    const double ext_y = (spec.ny - 1) * spec.spacing.dy;
    const double ext_z = (spec.nz - 1) * spec.spacing.dz;
    for (const auto& b : branches) {
        for (const Vec3& p : {b.start_mm, b.end_mm}) {
            const double r = b.radius_mm + margin;
            if (p.x - r < 0.0 || p.x + r > ext_x || p.y - r < 0.0 || p.y + r > ext_y ||
                p.z - r < 0.0 || p.z + r > ext_z)
                throw GeometryError("phantom: tree exceeds volume bounds (branch " +
                                    std::to_string(b.id) + ")");
        }
    }
    return branches;
}

inline Phantom generate_phantom(const PhantomSpec& spec) {
    const std::vector<Branch> branches = phantom_branch_table(spec);

    Phantom ph{
        Volume3D(spec.nx, spec.ny, spec.nz, spec.spacing, static_cast<float>(spec.background_hu)),
        BinaryMask(spec.nx, spec.ny, spec.nz, spec.spacing, std::uint8_t{0}),
        branches};

    // walls first so sibling walls never overwrite a lumen
    for (const auto& b : branches)
        detail::paint_capsule(b.start_mm, b.end_mm, b.radius_mm + spec.wall_thickness_mm,
                              spec.spacing, spec.nx, spec.ny, spec.nz, [&](int x, int y, int z) {
                                  ph.volume(x, y, z) = static_cast<float>(spec.wall_hu);
                              });
    for (const auto& b : branches)
        detail::paint_capsule(b.start_mm, b.end_mm, b.radius_mm, spec.spacing, spec.nx, spec.ny,
                              spec.nz, [&](int x, int y, int z) {
                                  ph.volume(x, y, z) = static_cast<float>(spec.lumen_hu);
                                  ph.gt_mask(x, y, z) = 1;
                              });

    if (spec.noise_sd_hu > 0.0) {
        Rng rng(spec.seed);
        for (auto& v : ph.volume.data())
            v += static_cast<float>(rng.normal(0.0, spec.noise_sd_hu));
    }
    return ph;
}

// ---------------------------------------------------------------------------
// Break injection
// ---------------------------------------------------------------------------

enum class BreakKind : std::uint8_t { clean_gap, obstruction };

struct BreakSite {
    int branch_id = 0;
    double center_fraction = 0.5; // position along the branch axis, in (0,1)
    int gap_voxels = 2;           // slab thickness along the axis
    BreakKind kind = BreakKind::clean_gap;
};

struct BreakSpec {
    std::vector<BreakSite> sites;
    std::uint64_t seed = 0; // drives the obstruction HU draws
    double obstruction_mean_hu = 0.0;
    double obstruction_sd_hu = 50.0;
    double obstruction_fill_margin_mm = 2.0; // lumen radius + this gets soft-tissue fill
};

struct BreakOutcome {
    BinaryMask broken_mask;
    Volume3D modified_volume;
};

// Cuts slabs perpendicular to branch axes out of the mask. clean_gap leaves
// the CT untouched; obstruction also fills the slab (lumen and wall) with
// soft-tissue HU so profiles across it read as obstructed.
inline BreakOutcome inject_breaks(const BinaryMask& gt_mask, const Volume3D& volume,
                                  const std::vector<Branch>& branches, const BreakSpec& spec) {
    require_same_geometry(gt_mask, volume, "inject_breaks");
    BreakOutcome out{gt_mask, volume};
    Rng rng(spec.seed);
    const Spacing sp = gt_mask.spacing();

    for (const auto& site : spec.sites) {
        if (site.branch_id < 0 || site.branch_id >= static_cast<int>(branches.size()))
            throw ContractError("inject_breaks: unknown branch id " + std::to_string(site.branch_id));
        const Branch& b = branches[static_cast<std::size_t>(site.branch_id)];
        if (!(site.center_fraction > 0.0 && site.center_fraction < 1.0))
            throw ContractError("inject_breaks: slab outside branch " + std::to_string(b.id));
        if (site.gap_voxels < 1)
            throw ContractError("inject_breaks: gap length must be >= 1 voxel");

        const Vec3 axis = (b.end_mm - b.start_mm);
        const double len = axis.norm();
        const Vec3 u = axis.normalized();
        // mm travelled along the axis per voxel step
        const double pitch = std::sqrt(u.x * sp.dx * u.x * sp.dx + u.y * sp.dy * u.y * sp.dy +
                                       u.z * sp.dz * u.z * sp.dz);
        const double half = 0.5 * site.gap_voxels * pitch;
        const double center_t = site.center_fraction * len;
        if (center_t - half <= 0.0 || center_t + half >= len)
            throw ContractError("inject_breaks: slab outside branch " + std::to_string(b.id));
        const Vec3 center = b.start_mm + u * center_t;

        const double cut_radius = b.radius_mm + 0.5 * sp.max_component();
        const double fill_radius = b.radius_mm + spec.obstruction_fill_margin_mm;

        detail::paint_capsule(b.start_mm, b.end_mm, fill_radius, sp, gt_mask.nx(), gt_mask.ny(),
                              gt_mask.nz(), [&](int x, int y, int z) {
                                  const Vec3 p = voxel_to_mm(Voxel{x, y, z}, sp);
                                  if (std::abs((p - center).dot(u)) > half) return;
                                  const double axial =
                                      detail::point_segment_distance(p, b.start_mm, b.end_mm);
                                  if (axial <= cut_radius) out.broken_mask(x, y, z) = 0;
                                  if (site.kind == BreakKind::obstruction)
                                      out.modified_volume(x, y, z) = static_cast<float>(
                                          rng.normal(spec.obstruction_mean_hu, spec.obstruction_sd_hu));
                              });
    }
    return out;
}

} // namespace airtopo

#endif // AIRTOPO_PHANTOM_HPP
