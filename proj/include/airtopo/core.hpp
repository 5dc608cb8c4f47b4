#ifndef AIRTOPO_CORE_HPP
#define AIRTOPO_CORE_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace airtopo {

// ---------------------------------------------------------------------------
// Errors. The CLI maps these onto exit codes, so the distinction matters.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or unsupported file contents.
class FormatError : public Error {
public:
    using Error::Error;
};

// Dimension/spacing mismatches and invalid geometry parameters.
class GeometryError : public Error {
public:
    using Error::Error;
};

// Filesystem-level failures.
class IoError : public Error {
public:
    using Error::Error;
};

// API preconditions violated by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, int epoch)
        : Error(what), epoch(epoch) {}
    int epoch;
};

// Sample synthesis could not find enough eligible voxels.
class GenerationError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Geometry primitives
// ---------------------------------------------------------------------------

// Voxel edge lengths in millimetres. Strictly positive and finite.
struct Spacing {
    double dx = 1.0;
    double dy = 1.0;
    double dz = 1.0;

    bool valid() const {
        return dx > 0.0 && dy > 0.0 && dz > 0.0 &&
               std::isfinite(dx) && std::isfinite(dy) && std::isfinite(dz);
    }

    double max_component() const { return std::max(dx, std::max(dy, dz)); }
    double min_component() const { return std::min(dx, std::min(dy, dz)); }

    friend bool operator==(const Spacing& a, const Spacing& b) {
        return a.dx == b.dx && a.dy == b.dy && a.dz == b.dz;
    }
};

// A point or direction in physical (mm) space.
struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3 operator*(const Vec3& a, double s) { return {a.x * s, a.y * s, a.z * s}; }
    friend Vec3 operator*(double s, const Vec3& a) { return a * s; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }

    Vec3 normalized() const {
        const double n = norm();
        return n > 0.0 ? Vec3{x / n, y / n, z / n} : Vec3{};
    }

    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
};

// Integer voxel coordinate.
struct Voxel {
    int x = 0;
    int y = 0;
    int z = 0;

    friend bool operator==(const Voxel& a, const Voxel& b) {
        return a.x == b.x && a.y == b.y && a.z == b.z;
    }
    friend bool operator!=(const Voxel& a, const Voxel& b) { return !(a == b); }
};

// Physical position of a voxel centre, ignoring origin (all algorithms work
// in the volume's own frame).
inline Vec3 voxel_to_mm(const Voxel& v, const Spacing& s) {
    return {v.x * s.dx, v.y * s.dy, v.z * s.dz};
}

// Anisotropic Euclidean distance between two voxel centres, in mm.
inline double voxel_distance_mm(const Voxel& a, const Voxel& b, const Spacing& s) {
    const double ddx = (a.x - b.x) * s.dx;
    const double ddy = (a.y - b.y) * s.dy;
    const double ddz = (a.z - b.z) * s.dz;
    return std::sqrt(ddx * ddx + ddy * ddy + ddz * ddz);
}

// ---------------------------------------------------------------------------
// Grid3: a dense 3D scalar grid, row-major with x fastest.
// ---------------------------------------------------------------------------

template <typename T>
class Grid3 {
public:
    Grid3() = default;

    Grid3(int nx, int ny, int nz, Spacing spacing, T fill = T{}, Vec3 origin = {})
        : nx_(nx), ny_(ny), nz_(nz), spacing_(spacing), origin_(origin),
          data_(static_cast<std::size_t>(check_dims(nx, ny, nz, spacing)) , fill) {}

    Grid3(int nx, int ny, int nz, Spacing spacing, std::vector<T> data, Vec3 origin = {})
        : nx_(nx), ny_(ny), nz_(nz), spacing_(spacing), origin_(origin), data_(std::move(data)) {
        if (data_.size() != check_dims(nx, ny, nz, spacing))
            throw GeometryError("grid data length does not match dims");
    }

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    int nz() const { return nz_; }
    std::size_t size() const { return data_.size(); }
    const Spacing& spacing() const { return spacing_; }
    const Vec3& origin() const { return origin_; }
    void set_origin(const Vec3& o) { origin_ = o; }

    bool in_bounds(int x, int y, int z) const {
        return x >= 0 && x < nx_ && y >= 0 && y < ny_ && z >= 0 && z < nz_;
    }
    bool in_bounds(const Voxel& v) const { return in_bounds(v.x, v.y, v.z); }

    std::size_t index(int x, int y, int z) const {
        return static_cast<std::size_t>(x) +
               static_cast<std::size_t>(nx_) *
                   (static_cast<std::size_t>(y) + static_cast<std::size_t>(ny_) * static_cast<std::size_t>(z));
    }
    std::size_t index(const Voxel& v) const { return index(v.x, v.y, v.z); }

    Voxel coord(std::size_t idx) const {
        const auto x = static_cast<int>(idx % static_cast<std::size_t>(nx_));
        idx /= static_cast<std::size_t>(nx_);
        const auto y = static_cast<int>(idx % static_cast<std::size_t>(ny_));
        const auto z = static_cast<int>(idx / static_cast<std::size_t>(ny_));
        return {x, y, z};
    }

    T& operator()(int x, int y, int z) { return data_[index(x, y, z)]; }
    const T& operator()(int x, int y, int z) const { return data_[index(x, y, z)]; }
    T& operator()(const Voxel& v) { return data_[index(v)]; }
    const T& operator()(const Voxel& v) const { return data_[index(v)]; }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::vector<T>& data() { return data_; }
    const std::vector<T>& data() const { return data_; }

    bool same_geometry(const Grid3& o) const {
        return nx_ == o.nx_ && ny_ == o.ny_ && nz_ == o.nz_ && spacing_ == o.spacing_;
    }
    template <typename U>
    bool same_geometry(const Grid3<U>& o) const {
        return nx_ == o.nx() && ny_ == o.ny() && nz_ == o.nz() && spacing_ == o.spacing();
    }

private:
    static std::size_t check_dims(int nx, int ny, int nz, const Spacing& s) {
        if (nx < 1 || ny < 1 || nz < 1)
            throw GeometryError("grid dims must be >= 1 per axis");
        if (!s.valid())
            throw GeometryError("voxel spacing must be positive and finite");
        return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
    }

    int nx_ = 0, ny_ = 0, nz_ = 0;
    Spacing spacing_{};
    Vec3 origin_{};
    std::vector<T> data_;
};

// CT intensities in Hounsfield units.
using Volume3D = Grid3<float>;
// Segmentation / skeleton voxels, stored as 0/1 bytes.
using BinaryMask = Grid3<std::uint8_t>;
// Per-voxel distance to the nearest background voxel centre, mm.
using DistanceField = Grid3<double>;

template <typename A, typename B>
void require_same_geometry(const Grid3<A>& a, const Grid3<B>& b, const char* what) {
    if (!a.same_geometry(b))
        throw GeometryError(std::string(what) + ": dims/spacing mismatch");
}

inline std::size_t count_foreground(const BinaryMask& m) {
    std::size_t n = 0;
    for (auto v : m.data()) n += (v != 0);
    return n;
}

// The 26-neighbourhood offsets in raster order (dz, dy, dx ascending).
// Every module that walks neighbourhoods uses this table so that scan
// order, and therefore output, is identical everywhere.
inline const std::array<Voxel, 26>& neighbor_offsets_26() {
    static const std::array<Voxel, 26> offsets = [] {
        std::array<Voxel, 26> o{};
        int i = 0;
        for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0 && dz == 0) continue;
                    o[i++] = Voxel{dx, dy, dz};
                }
        return o;
    }();
    return offsets;
}

inline const std::array<Voxel, 6>& neighbor_offsets_6() {
    static const std::array<Voxel, 6> offsets = {
        Voxel{0, 0, -1}, Voxel{0, -1, 0}, Voxel{-1, 0, 0},
        Voxel{1, 0, 0},  Voxel{0, 1, 0},  Voxel{0, 0, 1}};
    return offsets;
}

} // namespace airtopo

#endif // AIRTOPO_CORE_HPP
