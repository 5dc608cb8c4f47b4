#ifndef AIRTOPO_MORPHOLOGY_HPP
#define AIRTOPO_MORPHOLOGY_HPP

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "airtopo/core.hpp"

namespace airtopo {

// Foreground connectivity is 26, background/boundary connectivity is 6, and
// the volume border counts as background for the distance transform and for
// boundary extraction.

struct ComponentLabeling {
    std::vector<std::uint32_t> labels; // 0 = background, 1..count = components
    std::uint32_t count = 0;
    std::vector<std::size_t> sizes;    // sizes[k-1] = voxel count of label k
};

// 26-connectivity labeling via iterative flood fill. Labels are assigned in
// order of first-encountered voxel in raster scan, which makes the result
// deterministic and gives smaller labels to components met earlier.
inline ComponentLabeling connected_components(const BinaryMask& mask) {
    ComponentLabeling out;
    out.labels.assign(mask.size(), 0);
    const auto& offs = neighbor_offsets_26();
    std::vector<std::size_t> stack;

    for (std::size_t seed = 0; seed < mask.size(); ++seed) {
        if (!mask[seed] || out.labels[seed] != 0) continue;
        const std::uint32_t label = ++out.count;
        std::size_t size = 0;
        out.labels[seed] = label;
        stack.push_back(seed);
        while (!stack.empty()) {
            const std::size_t cur = stack.back();
            stack.pop_back();
            ++size;
            const Voxel c = mask.coord(cur);
            for (const auto& o : offs) {
                const int x = c.x + o.x, y = c.y + o.y, z = c.z + o.z;
                if (!mask.in_bounds(x, y, z)) continue;
                const std::size_t ni = mask.index(x, y, z);
                if (mask[ni] && out.labels[ni] == 0) {
                    out.labels[ni] = label;
                    stack.push_back(ni);
                }
            }
        }
        out.sizes.push_back(size);
    }
    return out;
}

// Restricts the mask to its largest 26-connected component. Ties go to the
// component whose first voxel has the smallest linear index, i.e. the lowest
// label. An empty mask stays empty.
inline BinaryMask largest_component(const BinaryMask& mask) {
    const ComponentLabeling cl = connected_components(mask);
    BinaryMask out(mask.nx(), mask.ny(), mask.nz(), mask.spacing(), std::uint8_t{0}, mask.origin());
    if (cl.count == 0) return out;

    std::uint32_t best = 1;
    for (std::uint32_t k = 2; k <= cl.count; ++k)
        if (cl.sizes[k - 1] > cl.sizes[best - 1]) best = k;

    for (std::size_t i = 0; i < mask.size(); ++i)
        out[i] = (cl.labels[i] == best) ? 1 : 0;
    return out;
}

namespace detail {

// All integer offsets whose anisotropic length is within radius_mm.
inline std::vector<Voxel> ball_offsets(double radius_mm, const Spacing& s) {
    std::vector<Voxel> offs;
    const int rx = static_cast<int>(radius_mm / s.dx);
    const int ry = static_cast<int>(radius_mm / s.dy);
    const int rz = static_cast<int>(radius_mm / s.dz);
    const double r2 = radius_mm * radius_mm;
    for (int dz = -rz; dz <= rz; ++dz)
        for (int dy = -ry; dy <= ry; ++dy)
            for (int dx = -rx; dx <= rx; ++dx) {
                const double d2 = dx * s.dx * dx * s.dx + dy * s.dy * dy * s.dy + dz * s.dz * dz * s.dz;
                if (d2 <= r2) offs.push_back({dx, dy, dz});
            }
    return offs;
}

} // namespace detail

// Dilation by an anisotropic Euclidean ball: output voxel v is set iff some
// input voxel u has distance(u, v) <= radius_mm between voxel centres.
inline BinaryMask dilate_ball(const BinaryMask& mask, double radius_mm) {
    if (!(radius_mm > 0.0))
        throw ContractError("dilate_ball: radius must be positive");
    const auto offs = detail::ball_offsets(radius_mm, mask.spacing());
    BinaryMask out = mask;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        const Voxel c = mask.coord(i);
        for (const auto& o : offs) {
            const int x = c.x + o.x, y = c.y + o.y, z = c.z + o.z;
            if (mask.in_bounds(x, y, z)) out(x, y, z) = 1;
        }
    }
    return out;
}

// Dilation by a fixed number of voxels in Chebyshev distance (the 3^k cube
// structuring element applied k times); used by the gt-restricted tree
// detected rate.
inline BinaryMask dilate_voxels(const BinaryMask& mask, int voxels) {
    BinaryMask out = mask;
    const auto& offs = neighbor_offsets_26();
    for (int pass = 0; pass < voxels; ++pass) {
        const BinaryMask src = out;
        for (std::size_t i = 0; i < src.size(); ++i) {
            if (!src[i]) continue;
            const Voxel c = src.coord(i);
            for (const auto& o : offs) {
                const int x = c.x + o.x, y = c.y + o.y, z = c.z + o.z;
                if (src.in_bounds(x, y, z)) out(x, y, z) = 1;
            }
        }
    }
    return out;
}

namespace detail {

// 1D squared-distance lower envelope (Felzenszwalb & Huttenlocher), with the
// sample positions scaled by the voxel pitch. `f` holds squared distances at
// integer positions; positions may include the two virtual border samples.
inline void envelope_1d(const std::vector<double>& pos_mm, const std::vector<double>& f,
                        const std::vector<double>& query_mm, std::vector<double>& out,
                        std::vector<int>& v, std::vector<double>& z) {
    const int n = static_cast<int>(pos_mm.size());
    v.resize(n);
    z.resize(n + 1);
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
        double s;
        while (true) {
            const int p = v[k];
            s = ((f[q] + pos_mm[q] * pos_mm[q]) - (f[p] + pos_mm[p] * pos_mm[p])) /
                (2.0 * pos_mm[q] - 2.0 * pos_mm[p]);
            if (s <= z[k]) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (std::size_t qi = 0; qi < query_mm.size(); ++qi) {
        const double x = query_mm[qi];
        while (z[k + 1] < x) ++k;
        const double d = x - pos_mm[v[k]];
        out[qi] = f[v[k]] + d * d;
    }
}

} // namespace detail

// Exact anisotropic Euclidean distance transform: for each foreground voxel,
// the distance in mm to the nearest background voxel centre, where the
// volume border also counts as background (virtual background voxels at
// index -1 and n on each axis). Background voxels map to 0.
//
// Separable three-pass algorithm. Pass 1 runs a direct two-sided scan along
// x; passes 2 and 3 combine squared distances with a lower-envelope sweep
// that includes the two virtual border parabolas at value 0.
inline DistanceField distance_transform(const BinaryMask& mask) {
    const int nx = mask.nx(), ny = mask.ny(), nz = mask.nz();
    const Spacing sp = mask.spacing();
    DistanceField field(nx, ny, nz, sp, 0.0, mask.origin());

    // Pass 1 (x): exact 1D distance to nearest background sample, including
    // the virtual border at x = -1 and x = nx. Stored squared.
    std::vector<double>& g = field.data();
    for (int z = 0; z < nz; ++z) {
        for (int y = 0; y < ny; ++y) {
            double carry = sp.dx; // distance to the virtual background at x-1
            for (int x = 0; x < nx; ++x) {
                const std::size_t i = mask.index(x, y, z);
                if (!mask[i]) {
                    g[i] = 0.0;
                    carry = sp.dx;
                } else {
                    g[i] = carry;
                    carry += sp.dx;
                }
            }
            carry = sp.dx;
            for (int x = nx - 1; x >= 0; --x) {
                const std::size_t i = mask.index(x, y, z);
                if (!mask[i]) {
                    carry = sp.dx;
                } else {
                    g[i] = std::min(g[i], carry);
                    carry += sp.dx;
                }
                g[i] = g[i] * g[i];
            }
        }
    }

    // Passes 2 and 3 (y then z): lower envelope over parabolas rooted at the
    // in-volume samples plus the two virtual border samples at value 0.
    std::vector<int> vbuf;
    std::vector<double> zbuf;

    {   // y pass
        const int n = ny;
        std::vector<double> pos(n + 2), f(n + 2), query(n), res(n);
        for (int y = -1; y <= n; ++y) pos[y + 1] = y * sp.dy;
        for (int y = 0; y < n; ++y) query[y] = y * sp.dy;
        for (int z = 0; z < nz; ++z) {
            for (int x = 0; x < nx; ++x) {
                f[0] = 0.0;
                f[n + 1] = 0.0;
                for (int y = 0; y < n; ++y) f[y + 1] = g[mask.index(x, y, z)];
                detail::envelope_1d(pos, f, query, res, vbuf, zbuf);
                for (int y = 0; y < n; ++y) g[mask.index(x, y, z)] = res[y];
            }
        }
    }
    {   // z pass
        const int n = nz;
        std::vector<double> pos(n + 2), f(n + 2), query(n), res(n);
        for (int z = -1; z <= n; ++z) pos[z + 1] = z * sp.dz;
        for (int z = 0; z < n; ++z) query[z] = z * sp.dz;
        for (int y = 0; y < ny; ++y) {
            for (int x = 0; x < nx; ++x) {
                f[0] = 0.0;
                f[n + 1] = 0.0;
                for (int z = 0; z < n; ++z) f[z + 1] = g[mask.index(x, y, z)];
                detail::envelope_1d(pos, f, query, res, vbuf, zbuf);
                for (int z = 0; z < n; ++z) g[mask.index(x, y, z)] = res[z];
            }
        }
    }

    for (std::size_t i = 0; i < field.size(); ++i)
        g[i] = mask[i] ? std::sqrt(g[i]) : 0.0;
    return field;
}

// Foreground voxels with at least one background 6-neighbour; the volume
// border counts as background. Raster order.
inline std::vector<Voxel> boundary_voxels(const BinaryMask& mask) {
    std::vector<Voxel> out;
    const auto& offs = neighbor_offsets_6();
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        const Voxel c = mask.coord(i);
        for (const auto& o : offs) {
            const int x = c.x + o.x, y = c.y + o.y, z = c.z + o.z;
            if (!mask.in_bounds(x, y, z) || !mask(x, y, z)) {
                out.push_back(c);
                break;
            }
        }
    }
    return out;
}

} // namespace airtopo

#endif // AIRTOPO_MORPHOLOGY_HPP
