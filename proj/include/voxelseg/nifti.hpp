#ifndef VOXELSEG_NIFTI_HPP
#define VOXELSEG_NIFTI_HPP

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "voxelseg/errors.hpp"

namespace voxelseg {

// Supported NIfTI-1 datatype codes. Enum values are the on-disk codes.
enum class ElemKind : int {
    u8 = 2,
    i16 = 4,
    f32 = 16,
    f64 = 64,
    u16 = 512,
};

int elem_bytes(ElemKind k);
int elem_bitpix(ElemKind k);
ElemKind elem_kind_from_code(int code); // throws UnsupportedDatatype
const char* elem_kind_name(ElemKind k);

// A 3-D scalar grid. Flat buffer is x-fastest (file order), native endian.
struct VoxelVolume {
    std::array<std::int64_t, 3> shape{0, 0, 0};
    ElemKind kind = ElemKind::f32;
    std::vector<unsigned char> data;

    std::int64_t voxels() const { return shape[0] * shape[1] * shape[2]; }
    std::int64_t flat(std::int64_t x, std::int64_t y, std::int64_t z) const {
        return x + shape[0] * (y + shape[1] * z);
    }

    template <typename T>
    T* as() {
        return reinterpret_cast<T*>(data.data());
    }
    template <typename T>
    const T* as() const {
        return reinterpret_cast<const T*>(data.data());
    }

    static VoxelVolume make(ElemKind kind, std::int64_t nx, std::int64_t ny, std::int64_t nz);
};

// Complete NIfTI-1 field set. Fields the pipeline does not interpret
// (orientation, intents, pixdims) are carried verbatim through round trips.
struct NiftiHeader {
    std::int32_t sizeof_hdr = 348;
    char data_type[10] = {};
    char db_name[18] = {};
    std::int32_t extents = 0;
    std::int16_t session_error = 0;
    char regular = 'r';
    char dim_info = 0;
    std::int16_t dim[8] = {3, 1, 1, 1, 1, 1, 1, 1};
    float intent_p1 = 0, intent_p2 = 0, intent_p3 = 0;
    std::int16_t intent_code = 0;
    std::int16_t datatype = 16;
    std::int16_t bitpix = 32;
    std::int16_t slice_start = 0;
    float pixdim[8] = {1, 1, 1, 1, 0, 0, 0, 0};
    float vox_offset = 352;
    float scl_slope = 1;
    float scl_inter = 0;
    std::int16_t slice_end = 0;
    char slice_code = 0;
    char xyzt_units = 0;
    float cal_max = 0, cal_min = 0;
    float slice_duration = 0, toffset = 0;
    std::int32_t glmax = 0, glmin = 0;
    char descrip[80] = {};
    char aux_file[24] = {};
    std::int16_t qform_code = 0, sform_code = 0;
    float quatern_b = 0, quatern_c = 0, quatern_d = 0;
    float qoffset_x = 0, qoffset_y = 0, qoffset_z = 0;
    float srow_x[4] = {}, srow_y[4] = {}, srow_z[4] = {};
    char intent_name[16] = {};
    char magic[4] = {'n', '+', '1', '\0'};

    bool big_endian_source = false; // inferred while parsing, not written back

    int rank() const { return dim[0]; }
    std::int64_t nx() const { return dim[1]; }
    std::int64_t ny() const { return dim[0] >= 2 ? dim[2] : 1; }
    std::int64_t nz() const { return dim[0] >= 3 ? dim[3] : 1; }
    ElemKind elem_kind() const { return elem_kind_from_code(datatype); }
    bool scaling_active() const {
        return scl_slope != 0.0f && (scl_slope != 1.0f || scl_inter != 0.0f);
    }
};

constexpr std::size_t kNiftiHeaderSize = 348;

// Decode a 348-byte header, inferring endianness from sizeof_hdr.
NiftiHeader parse_header(const unsigned char* raw, std::size_t len);
NiftiHeader parse_header(const std::vector<unsigned char>& raw);

// Little-endian serialization of the 348-byte header.
std::vector<unsigned char> serialize_header(const NiftiHeader& hdr);

// Header-only read: O(1) bytes regardless of file size, gzip-aware.
NiftiHeader read_header(const std::string& path);

// Full read. Image path: scl_slope/scl_inter applied, output f32.
std::pair<NiftiHeader, VoxelVolume> read_volume(const std::string& path);

// Raw read for masks: stored element kind, no intensity scaling.
std::pair<NiftiHeader, VoxelVolume> read_volume_raw(const std::string& path);

// Write a single-file little-endian NIfTI-1 ("n+1", vox_offset 352).
// dim/datatype/bitpix/vox_offset are derived from `vol`; the remaining
// header fields pass through from `proto`.
void write_volume(const NiftiHeader& proto, const VoxelVolume& vol, const std::string& path,
                  bool gzip);
void write_volume(const VoxelVolume& vol, const std::string& path, bool gzip);

NiftiHeader default_header(const VoxelVolume& vol);

bool file_is_gzip(const std::string& path);

} // namespace voxelseg

#endif
