#include "voxelseg/nifti.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

namespace voxelseg {

int elem_bytes(ElemKind k) {
    switch (k) {
        case ElemKind::u8: return 1;
        case ElemKind::i16: return 2;
        case ElemKind::u16: return 2;
        case ElemKind::f32: return 4;
        case ElemKind::f64: return 8;
    }
    throw UnsupportedDatatype("unknown element kind");
}

int elem_bitpix(ElemKind k) { return elem_bytes(k) * 8; }

ElemKind elem_kind_from_code(int code) {
    switch (code) {
        case 2: return ElemKind::u8;
        case 4: return ElemKind::i16;
        case 16: return ElemKind::f32;
        case 64: return ElemKind::f64;
        case 512: return ElemKind::u16;
        default:
            throw UnsupportedDatatype("NIfTI datatype code " + std::to_string(code) +
                                      " (supported: 2,4,16,64,512)");
    }
}

const char* elem_kind_name(ElemKind k) {
    switch (k) {
        case ElemKind::u8: return "u8";
        case ElemKind::i16: return "i16";
        case ElemKind::u16: return "u16";
        case ElemKind::f32: return "f32";
        case ElemKind::f64: return "f64";
    }
    return "?";
}

VoxelVolume VoxelVolume::make(ElemKind kind, std::int64_t nx, std::int64_t ny, std::int64_t nz) {
    VoxelVolume v;
    v.kind = kind;
    v.shape = {nx, ny, nz};
    v.data.assign(static_cast<std::size_t>(nx * ny * nz * elem_bytes(kind)), 0);
    return v;
}

namespace {

// Endian-aware field readers over the raw header block. NIfTI has no
// endianness flag; it is inferred from whether sizeof_hdr reads as 348.
struct FieldReader {
    const unsigned char* p;
    bool swap;

    std::uint16_t u16(std::size_t off) const {
        std::uint16_t v;
        std::memcpy(&v, p + off, 2);
        if (swap) v = static_cast<std::uint16_t>((v >> 8) | (v << 8));
        return v;
    }
    std::int16_t i16(std::size_t off) const { return static_cast<std::int16_t>(u16(off)); }
    std::uint32_t u32(std::size_t off) const {
        std::uint32_t v;
        std::memcpy(&v, p + off, 4);
        if (swap) v = __builtin_bswap32(v);
        return v;
    }
    std::int32_t i32(std::size_t off) const { return static_cast<std::int32_t>(u32(off)); }
    float f32(std::size_t off) const {
        std::uint32_t v = u32(off);
        float f;
        std::memcpy(&f, &v, 4);
        return f;
    }
    void bytes(std::size_t off, char* dst, std::size_t n) const { std::memcpy(dst, p + off, n); }
};

struct FieldWriter {
    unsigned char* p;

    void u16(std::size_t off, std::uint16_t v) { std::memcpy(p + off, &v, 2); }
    void i16(std::size_t off, std::int16_t v) { u16(off, static_cast<std::uint16_t>(v)); }
    void u32(std::size_t off, std::uint32_t v) { std::memcpy(p + off, &v, 4); }
    void i32(std::size_t off, std::int32_t v) { u32(off, static_cast<std::uint32_t>(v)); }
    void f32(std::size_t off, float f) {
        std::uint32_t v;
        std::memcpy(&v, &f, 4);
        u32(off, v);
    }
    void bytes(std::size_t off, const char* src, std::size_t n) { std::memcpy(p + off, src, n); }
};

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    in.seekg(0, std::ios::end);
    const std::streamoff n = in.tellg();
    in.seekg(0);
    std::vector<unsigned char> buf(static_cast<std::size_t>(n));
    if (n > 0) in.read(reinterpret_cast<char*>(buf.data()), n);
    if (!in) throw IoError("short read on " + path);
    return buf;
}

bool starts_gzip(const unsigned char* p, std::size_t n) {
    return n >= 2 && p[0] == 0x1f && p[1] == 0x8b;
}

std::vector<unsigned char> gunzip(const unsigned char* src, std::size_t n,
                                  std::size_t stop_after = 0) {
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 16) != Z_OK) throw IoError("inflateInit2 failed");
    std::vector<unsigned char> out;
    out.reserve(stop_after ? stop_after : n * 3);
    unsigned char chunk[1 << 15];
    zs.next_in = const_cast<unsigned char*>(src);
    zs.avail_in = static_cast<uInt>(n);
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = chunk;
        zs.avail_out = sizeof(chunk);
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw IoError("gzip stream corrupt (zlib rc " + std::to_string(rc) + ")");
        }
        out.insert(out.end(), chunk, chunk + (sizeof(chunk) - zs.avail_out));
        if (stop_after && out.size() >= stop_after) break;
        if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) break; // truncated input
    }
    inflateEnd(&zs);
    return out;
}

std::vector<unsigned char> gzip_compress(const std::vector<unsigned char>& src) {
    z_stream zs{};
    if (deflateInit2(&zs, 6, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
        throw IoError("deflateInit2 failed");
    std::vector<unsigned char> out;
    out.resize(deflateBound(&zs, static_cast<uLong>(src.size())) + 32);
    zs.next_in = const_cast<unsigned char*>(src.data());
    zs.avail_in = static_cast<uInt>(src.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    if (deflate(&zs, Z_FINISH) != Z_STREAM_END) {
        deflateEnd(&zs);
        throw IoError("gzip compression failed");
    }
    out.resize(zs.total_out);
    deflateEnd(&zs);
    return out;
}

void swap_payload_in_place(std::vector<unsigned char>& buf, int width) {
    if (width == 1) return;
    for (std::size_t i = 0; i + width <= buf.size(); i += static_cast<std::size_t>(width))
        for (int a = 0, b = width - 1; a < b; ++a, --b) std::swap(buf[i + a], buf[i + b]);
}

// read the header block plus payload bytes from an already-loaded (and
// already-decompressed) file image
VoxelVolume decode_payload(const NiftiHeader& hdr, const std::vector<unsigned char>& file) {
    const ElemKind kind = hdr.elem_kind();
    const std::int64_t nvox = hdr.nx() * hdr.ny() * hdr.nz();
    const std::int64_t need = nvox * elem_bytes(kind);
    const auto off = static_cast<std::int64_t>(hdr.vox_offset);
    if (off + need > static_cast<std::int64_t>(file.size()))
        throw TruncatedPayload("file holds " + std::to_string(file.size()) + " bytes, voxel data needs " +
                               std::to_string(off + need));
    VoxelVolume vol;
    vol.kind = kind;
    vol.shape = {hdr.nx(), hdr.ny(), hdr.nz()};
    vol.data.assign(file.begin() + off, file.begin() + off + need);
    if (hdr.big_endian_source) swap_payload_in_place(vol.data, elem_bytes(kind));
    return vol;
}

template <typename T>
void scale_into_f32(const unsigned char* src, std::int64_t n, float slope, float inter, float* dst) {
    const T* in = reinterpret_cast<const T*>(src);
    for (std::int64_t i = 0; i < n; ++i)
        dst[i] = static_cast<float>(in[i]) * slope + inter;
}

VoxelVolume to_f32(const VoxelVolume& raw, float slope, float inter) {
    VoxelVolume out;
    out.kind = ElemKind::f32;
    out.shape = raw.shape;
    out.data.resize(static_cast<std::size_t>(raw.voxels()) * 4);
    float* dst = out.as<float>();
    switch (raw.kind) {
        case ElemKind::u8: scale_into_f32<std::uint8_t>(raw.data.data(), raw.voxels(), slope, inter, dst); break;
        case ElemKind::i16: scale_into_f32<std::int16_t>(raw.data.data(), raw.voxels(), slope, inter, dst); break;
        case ElemKind::u16: scale_into_f32<std::uint16_t>(raw.data.data(), raw.voxels(), slope, inter, dst); break;
        case ElemKind::f32: scale_into_f32<float>(raw.data.data(), raw.voxels(), slope, inter, dst); break;
        case ElemKind::f64: scale_into_f32<double>(raw.data.data(), raw.voxels(), slope, inter, dst); break;
    }
    return out;
}

std::vector<unsigned char> load_decompressed(const std::string& path) {
    std::vector<unsigned char> file = read_file(path);
    if (starts_gzip(file.data(), file.size())) file = gunzip(file.data(), file.size());
    return file;
}

} // namespace

NiftiHeader parse_header(const unsigned char* raw, std::size_t len) {
    if (len != kNiftiHeaderSize)
        throw BadHeaderSize("header must be exactly 348 bytes, got " + std::to_string(len));

    FieldReader r{raw, false};
    if (r.i32(0) != 348) {
        r.swap = true;
        if (r.i32(0) != 348)
            throw BadHeaderSize("sizeof_hdr is not 348 under either endianness");
    }

    NiftiHeader h;
    h.big_endian_source = r.swap;
    h.sizeof_hdr = r.i32(0);
    r.bytes(4, h.data_type, 10);
    r.bytes(14, h.db_name, 18);
    h.extents = r.i32(32);
    h.session_error = r.i16(36);
    r.bytes(38, &h.regular, 1);
    r.bytes(39, &h.dim_info, 1);
    for (int i = 0; i < 8; ++i) h.dim[i] = r.i16(40 + 2 * static_cast<std::size_t>(i));
    h.intent_p1 = r.f32(56);
    h.intent_p2 = r.f32(60);
    h.intent_p3 = r.f32(64);
    h.intent_code = r.i16(68);
    h.datatype = r.i16(70);
    h.bitpix = r.i16(72);
    h.slice_start = r.i16(74);
    for (int i = 0; i < 8; ++i) h.pixdim[i] = r.f32(76 + 4 * static_cast<std::size_t>(i));
    h.vox_offset = r.f32(108);
    h.scl_slope = r.f32(112);
    h.scl_inter = r.f32(116);
    h.slice_end = r.i16(120);
    r.bytes(122, &h.slice_code, 1);
    r.bytes(123, &h.xyzt_units, 1);
    h.cal_max = r.f32(124);
    h.cal_min = r.f32(128);
    h.slice_duration = r.f32(132);
    h.toffset = r.f32(136);
    h.glmax = r.i32(140);
    h.glmin = r.i32(144);
    r.bytes(148, h.descrip, 80);
    r.bytes(228, h.aux_file, 24);
    h.qform_code = r.i16(252);
    h.sform_code = r.i16(254);
    h.quatern_b = r.f32(256);
    h.quatern_c = r.f32(260);
    h.quatern_d = r.f32(264);
    h.qoffset_x = r.f32(268);
    h.qoffset_y = r.f32(272);
    h.qoffset_z = r.f32(276);
    for (int i = 0; i < 4; ++i) {
        h.srow_x[i] = r.f32(280 + 4 * static_cast<std::size_t>(i));
        h.srow_y[i] = r.f32(296 + 4 * static_cast<std::size_t>(i));
        h.srow_z[i] = r.f32(312 + 4 * static_cast<std::size_t>(i));
    }
    r.bytes(328, h.intent_name, 16);
    r.bytes(344, h.magic, 4);

    if (std::memcmp(h.magic, "ni1\0", 4) == 0)
        throw HeaderPairUnsupported("header-pair (.hdr/.img) files are not supported");
    if (std::memcmp(h.magic, "n+1\0", 4) != 0) throw BadMagic("not a NIfTI-1 file");
    if (h.dim[0] < 1 || h.dim[0] > 7)
        throw BadHeaderSize("dim[0] out of range: " + std::to_string(h.dim[0]));
    for (int i = 1; i <= h.dim[0]; ++i)
        if (h.dim[i] < 1)
            throw BadHeaderSize("axis " + std::to_string(i) + " has extent " + std::to_string(h.dim[i]));
    const ElemKind kind = elem_kind_from_code(h.datatype);
    if (h.bitpix != elem_bitpix(kind))
        throw UnsupportedDatatype("bitpix " + std::to_string(h.bitpix) + " does not match datatype " +
                                  std::to_string(h.datatype));
    if (h.vox_offset < 352.0f)
        throw BadHeaderSize("vox_offset " + std::to_string(h.vox_offset) + " < 352");
    return h;
}

NiftiHeader parse_header(const std::vector<unsigned char>& raw) {
    return parse_header(raw.data(), raw.size());
}

std::vector<unsigned char> serialize_header(const NiftiHeader& h) {
    std::vector<unsigned char> buf(kNiftiHeaderSize, 0);
    FieldWriter w{buf.data()};
    w.i32(0, 348);
    w.bytes(4, h.data_type, 10);
    w.bytes(14, h.db_name, 18);
    w.i32(32, h.extents);
    w.i16(36, h.session_error);
    w.bytes(38, &h.regular, 1);
    w.bytes(39, &h.dim_info, 1);
    for (int i = 0; i < 8; ++i) w.i16(40 + 2 * static_cast<std::size_t>(i), h.dim[i]);
    w.f32(56, h.intent_p1);
    w.f32(60, h.intent_p2);
    w.f32(64, h.intent_p3);
    w.i16(68, h.intent_code);
    w.i16(70, h.datatype);
    w.i16(72, h.bitpix);
    w.i16(74, h.slice_start);
    for (int i = 0; i < 8; ++i) w.f32(76 + 4 * static_cast<std::size_t>(i), h.pixdim[i]);
    w.f32(108, h.vox_offset);
    w.f32(112, h.scl_slope);
    w.f32(116, h.scl_inter);
    w.i16(120, h.slice_end);
    w.bytes(122, &h.slice_code, 1);
    w.bytes(123, &h.xyzt_units, 1);
    w.f32(124, h.cal_max);
    w.f32(128, h.cal_min);
    w.f32(132, h.slice_duration);
    w.f32(136, h.toffset);
    w.i32(140, h.glmax);
    w.i32(144, h.glmin);
    w.bytes(148, h.descrip, 80);
    w.bytes(228, h.aux_file, 24);
    w.i16(252, h.qform_code);
    w.i16(254, h.sform_code);
    w.f32(256, h.quatern_b);
    w.f32(260, h.quatern_c);
    w.f32(264, h.quatern_d);
    w.f32(268, h.qoffset_x);
    w.f32(272, h.qoffset_y);
    w.f32(276, h.qoffset_z);
    for (int i = 0; i < 4; ++i) {
        w.f32(280 + 4 * static_cast<std::size_t>(i), h.srow_x[i]);
        w.f32(296 + 4 * static_cast<std::size_t>(i), h.srow_y[i]);
        w.f32(312 + 4 * static_cast<std::size_t>(i), h.srow_z[i]);
    }
    w.bytes(328, h.intent_name, 16);
    w.bytes(344, h.magic, 4);
    return buf;
}

NiftiHeader read_header(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    unsigned char probe[2];
    in.read(reinterpret_cast<char*>(probe), 2);
    if (!in) throw IoError("file too small: " + path);
    in.seekg(0);
    if (starts_gzip(probe, 2)) {
        // pull compressed bytes until 348 header bytes decode; never the payload
        std::vector<unsigned char> comp;
        std::vector<unsigned char> out;
        z_stream zs{};
        if (inflateInit2(&zs, 15 + 16) != Z_OK) throw IoError("inflateInit2 failed");
        unsigned char cbuf[4096], obuf[4096];
        int rc = Z_OK;
        while (out.size() < kNiftiHeaderSize && rc != Z_STREAM_END) {
            in.read(reinterpret_cast<char*>(cbuf), sizeof(cbuf));
            const std::streamsize got = in.gcount();
            if (got <= 0) break;
            zs.next_in = cbuf;
            zs.avail_in = static_cast<uInt>(got);
            while (zs.avail_in > 0 && out.size() < kNiftiHeaderSize) {
                zs.next_out = obuf;
                zs.avail_out = sizeof(obuf);
                rc = inflate(&zs, Z_NO_FLUSH);
                if (rc != Z_OK && rc != Z_STREAM_END) {
                    inflateEnd(&zs);
                    throw IoError("gzip stream corrupt in " + path);
                }
                out.insert(out.end(), obuf, obuf + (sizeof(obuf) - zs.avail_out));
                if (rc == Z_STREAM_END) break;
            }
        }
        inflateEnd(&zs);
        if (out.size() < kNiftiHeaderSize) throw TruncatedPayload("gzip header short in " + path);
        return parse_header(out.data(), kNiftiHeaderSize);
    }
    std::vector<unsigned char> buf(kNiftiHeaderSize);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(kNiftiHeaderSize))
        throw TruncatedPayload("file shorter than a NIfTI-1 header: " + path);
    return parse_header(buf);
}

std::pair<NiftiHeader, VoxelVolume> read_volume_raw(const std::string& path) {
    const std::vector<unsigned char> file = load_decompressed(path);
    if (file.size() < kNiftiHeaderSize)
        throw TruncatedPayload("file shorter than a NIfTI-1 header: " + path);
    NiftiHeader hdr = parse_header(file.data(), kNiftiHeaderSize);
    for (int i = 4; i <= hdr.dim[0]; ++i)
        if (hdr.dim[i] != 1)
            throw IoError("only scalar 3-D volumes are supported, got " + std::to_string(hdr.dim[0]) +
                          "-D in " + path);
    return {hdr, decode_payload(hdr, file)};
}

std::pair<NiftiHeader, VoxelVolume> read_volume(const std::string& path) {
    auto [hdr, raw] = read_volume_raw(path);
    const float slope = hdr.scaling_active() ? hdr.scl_slope : 1.0f;
    const float inter = hdr.scaling_active() ? hdr.scl_inter : 0.0f;
    if (raw.kind == ElemKind::f32 && slope == 1.0f && inter == 0.0f) return {hdr, std::move(raw)};
    return {hdr, to_f32(raw, slope, inter)};
}

void write_volume(const NiftiHeader& proto, const VoxelVolume& vol, const std::string& path,
                  bool gzip) {
    if (static_cast<std::int64_t>(vol.data.size()) != vol.voxels() * elem_bytes(vol.kind))
        throw ShapeMismatch("voxel volume buffer does not match its shape");

    NiftiHeader hdr = proto;
    hdr.sizeof_hdr = 348;
    hdr.dim[0] = 3;
    hdr.dim[1] = static_cast<std::int16_t>(vol.shape[0]);
    hdr.dim[2] = static_cast<std::int16_t>(vol.shape[1]);
    hdr.dim[3] = static_cast<std::int16_t>(vol.shape[2]);
    for (int i = 4; i < 8; ++i) hdr.dim[i] = 1;
    hdr.datatype = static_cast<std::int16_t>(vol.kind);
    hdr.bitpix = static_cast<std::int16_t>(elem_bitpix(vol.kind));
    hdr.vox_offset = 352;
    std::memcpy(hdr.magic, "n+1\0", 4);

    std::vector<unsigned char> out = serialize_header(hdr);
    out.resize(352, 0); // empty extension block
    out.insert(out.end(), vol.data.begin(), vol.data.end());
    if (gzip) out = gzip_compress(out);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot create " + path);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("short write on " + path);
}

void write_volume(const VoxelVolume& vol, const std::string& path, bool gzip) {
    write_volume(default_header(vol), vol, path, gzip);
}

NiftiHeader default_header(const VoxelVolume& vol) {
    NiftiHeader h;
    h.dim[1] = static_cast<std::int16_t>(vol.shape[0]);
    h.dim[2] = static_cast<std::int16_t>(vol.shape[1]);
    h.dim[3] = static_cast<std::int16_t>(vol.shape[2]);
    h.datatype = static_cast<std::int16_t>(vol.kind);
    h.bitpix = static_cast<std::int16_t>(elem_bitpix(vol.kind));
    return h;
}

bool file_is_gzip(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    unsigned char probe[2] = {0, 0};
    in.read(reinterpret_cast<char*>(probe), 2);
    return in.gcount() == 2 && starts_gzip(probe, 2);
}

} // namespace voxelseg
