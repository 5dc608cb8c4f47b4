#ifndef AIRTOPO_NIFTI_HPP
#define AIRTOPO_NIFTI_HPP

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "airtopo/core.hpp"

namespace airtopo {

// NIfTI-1 single-file (.nii) reader/writer for the subset this tool needs:
// uncompressed, little-endian, magic "n+1", dim[0] == 3, datatype uint8,
// int16 or float32. Orientation fields beyond pixdim are ignored on read
// (qoffset/srow are used only to recover the informational origin) and
// written as a plain identity-axis sform.

namespace nifti {

constexpr std::int16_t kDtUint8 = 2;
constexpr std::int16_t kDtInt16 = 4;
constexpr std::int16_t kDtFloat32 = 16;

#pragma pack(push, 1)
struct Header {
    std::int32_t sizeof_hdr;    // must be 348
    char data_type[10];
    char db_name[18];
    std::int32_t extents;
    std::int16_t session_error;
    char regular;
    char dim_info;
    std::int16_t dim[8];
    float intent_p1;
    float intent_p2;
    float intent_p3;
    std::int16_t intent_code;
    std::int16_t datatype;
    std::int16_t bitpix;
    std::int16_t slice_start;
    float pixdim[8];
    float vox_offset;
    float scl_slope;
    float scl_inter;
    std::int16_t slice_end;
    char slice_code;
    char xyzt_units;
    float cal_max;
    float cal_min;
    float slice_duration;
    float toffset;
    std::int32_t glmax;
    std::int32_t glmin;
    char descrip[80];
    char aux_file[24];
    std::int16_t qform_code;
    std::int16_t sform_code;
    float quatern_b;
    float quatern_c;
    float quatern_d;
    float qoffset_x;
    float qoffset_y;
    float qoffset_z;
    float srow_x[4];
    float srow_y[4];
    float srow_z[4];
    char intent_name[16];
    char magic[4];
};
#pragma pack(pop)

static_assert(sizeof(Header) == 348, "NIfTI-1 header must be 348 bytes");

inline Header read_header(std::ifstream& in, const std::string& path) {
    Header h{};
    in.read(reinterpret_cast<char*>(&h), sizeof(Header));
    if (!in)
        throw FormatError(path + ": file shorter than the 348-byte NIfTI-1 header");
    if (h.sizeof_hdr != 348)
        throw FormatError(path + ": sizeof_hdr is " + std::to_string(h.sizeof_hdr) +
                          ", expected 348 (big-endian and NIfTI-2 files are unsupported)");
    if (std::strncmp(h.magic, "n+1", 3) != 0)
        throw FormatError(path + ": magic is not \"n+1\" (only single-file uncompressed NIfTI-1 is supported)");
    if (h.dim[0] != 3)
        throw FormatError(path + ": dim[0] is " + std::to_string(h.dim[0]) + ", expected 3");
    if (h.datatype != kDtUint8 && h.datatype != kDtInt16 && h.datatype != kDtFloat32)
        throw FormatError(path + ": datatype " + std::to_string(h.datatype) +
                          " unsupported (need uint8, int16 or float32)");
    for (int i = 1; i <= 3; ++i) {
        if (h.dim[i] < 1)
            throw FormatError(path + ": dim[" + std::to_string(i) + "] must be >= 1");
        if (!(h.pixdim[i] > 0.0f))
            throw GeometryError(path + ": pixdim[" + std::to_string(i) + "] must be positive");
    }
    if (h.vox_offset < 348.0f)
        throw FormatError(path + ": vox_offset " + std::to_string(h.vox_offset) + " < 348");
    return h;
}

inline std::vector<char> read_payload(std::ifstream& in, const Header& h, const std::string& path) {
    const std::size_t n = static_cast<std::size_t>(h.dim[1]) * h.dim[2] * h.dim[3];
    const std::size_t bytes = n * static_cast<std::size_t>(h.bitpix / 8);
    in.seekg(static_cast<std::streamoff>(h.vox_offset), std::ios::beg);
    std::vector<char> raw(bytes);
    in.read(raw.data(), static_cast<std::streamsize>(bytes));
    if (!in)
        throw FormatError(path + ": payload truncated");
    return raw;
}

inline Header make_header(int nx, int ny, int nz, const Spacing& s, const Vec3& origin,
                          std::int16_t datatype, std::int16_t bitpix) {
    Header h{};
    h.sizeof_hdr = 348;
    h.regular = 'r';
    h.dim[0] = 3;
    h.dim[1] = static_cast<std::int16_t>(nx);
    h.dim[2] = static_cast<std::int16_t>(ny);
    h.dim[3] = static_cast<std::int16_t>(nz);
    for (int i = 4; i < 8; ++i) h.dim[i] = 1;
    h.datatype = datatype;
    h.bitpix = bitpix;
    h.pixdim[0] = 1.0f;
    h.pixdim[1] = static_cast<float>(s.dx);
    h.pixdim[2] = static_cast<float>(s.dy);
    h.pixdim[3] = static_cast<float>(s.dz);
    h.vox_offset = 352.0f;
    h.scl_slope = 1.0f;
    h.scl_inter = 0.0f;
    h.xyzt_units = 2; // NIFTI_UNITS_MM
    h.sform_code = 1;
    h.srow_x[0] = static_cast<float>(s.dx);
    h.srow_y[1] = static_cast<float>(s.dy);
    h.srow_z[2] = static_cast<float>(s.dz);
    h.srow_x[3] = static_cast<float>(origin.x);
    h.srow_y[3] = static_cast<float>(origin.y);
    h.srow_z[3] = static_cast<float>(origin.z);
    std::memcpy(h.magic, "n+1", 4);
    return h;
}

inline void write_file(const std::string& path, const Header& h, const void* payload, std::size_t bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError(path + ": cannot open for writing");
    out.write(reinterpret_cast<const char*>(&h), sizeof(Header));
    const char pad[4] = {0, 0, 0, 0}; // extension flag, pads header to vox_offset 352
    out.write(pad, 4);
    out.write(static_cast<const char*>(payload), static_cast<std::streamsize>(bytes));
    if (!out)
        throw IoError(path + ": write failed");
}

} // namespace nifti

// Reads a scalar volume. Intensities are scaled by scl_slope/scl_inter when
// scl_slope != 0, per the NIfTI-1 header definition.
inline Volume3D read_nifti_volume(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError(path + ": cannot open");
    const nifti::Header h = nifti::read_header(in, path);
    const auto raw = nifti::read_payload(in, h, path);
    const int nx = h.dim[1], ny = h.dim[2], nz = h.dim[3];
    const std::size_t n = static_cast<std::size_t>(nx) * ny * nz;
    const Spacing sp{h.pixdim[1], h.pixdim[2], h.pixdim[3]};

    std::vector<float> data(n);
    switch (h.datatype) {
    case nifti::kDtUint8: {
        const auto* p = reinterpret_cast<const std::uint8_t*>(raw.data());
        for (std::size_t i = 0; i < n; ++i) data[i] = static_cast<float>(p[i]);
        break;
    }
    case nifti::kDtInt16: {
        const auto* p = reinterpret_cast<const std::int16_t*>(raw.data());
        for (std::size_t i = 0; i < n; ++i) data[i] = static_cast<float>(p[i]);
        break;
    }
    case nifti::kDtFloat32: {
        const auto* p = reinterpret_cast<const float*>(raw.data());
        for (std::size_t i = 0; i < n; ++i) data[i] = p[i];
        break;
    }
    default:
        throw FormatError(path + ": unreachable datatype");
    }
    if (h.scl_slope != 0.0f && !(h.scl_slope == 1.0f && h.scl_inter == 0.0f)) {
        for (auto& v : data) v = v * h.scl_slope + h.scl_inter;
    }

    Vec3 origin{};
    if (h.sform_code > 0) {
        origin = {h.srow_x[3], h.srow_y[3], h.srow_z[3]};
    } else if (h.qform_code > 0) {
        origin = {h.qoffset_x, h.qoffset_y, h.qoffset_z};
    }
    return Volume3D(nx, ny, nz, sp, std::move(data), origin);
}

// Reads a binary mask. The file must be uint8 with values in {0, 1}; that is
// the mask convention this tool reads and writes.
inline BinaryMask read_nifti_mask(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError(path + ": cannot open");
    const nifti::Header h = nifti::read_header(in, path);
    if (h.datatype != nifti::kDtUint8)
        throw FormatError(path + ": datatype must be uint8 for a binary mask");
    const auto raw = nifti::read_payload(in, h, path);
    const int nx = h.dim[1], ny = h.dim[2], nz = h.dim[3];
    const std::size_t n = static_cast<std::size_t>(nx) * ny * nz;

    std::vector<std::uint8_t> data(n);
    const auto* p = reinterpret_cast<const std::uint8_t*>(raw.data());
    for (std::size_t i = 0; i < n; ++i) {
        if (p[i] > 1)
            throw FormatError(path + ": mask voxel value " + std::to_string(p[i]) +
                              " outside {0,1}");
        data[i] = p[i];
    }
    Vec3 origin{};
    if (h.sform_code > 0) origin = {h.srow_x[3], h.srow_y[3], h.srow_z[3]};
    else if (h.qform_code > 0) origin = {h.qoffset_x, h.qoffset_y, h.qoffset_z};
    return BinaryMask(nx, ny, nz, Spacing{h.pixdim[1], h.pixdim[2], h.pixdim[3]},
                      std::move(data), origin);
}

// Writes a volume as float32.
inline void write_nifti(const Volume3D& vol, const std::string& path) {
    const auto h = nifti::make_header(vol.nx(), vol.ny(), vol.nz(), vol.spacing(),
                                      vol.origin(), nifti::kDtFloat32, 32);
    nifti::write_file(path, h, vol.data().data(), vol.size() * sizeof(float));
}

// Writes a mask as uint8 {0, 1}.
inline void write_nifti(const BinaryMask& mask, const std::string& path) {
    const auto h = nifti::make_header(mask.nx(), mask.ny(), mask.nz(), mask.spacing(),
                                      mask.origin(), nifti::kDtUint8, 8);
    nifti::write_file(path, h, mask.data().data(), mask.size());
}

} // namespace airtopo

#endif // AIRTOPO_NIFTI_HPP
