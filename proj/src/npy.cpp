#include "voxelseg/npy.hpp"

#include <cstring>

#include "voxelseg/errors.hpp"

namespace voxelseg {

template <>
const char* npy_descr<float>() {
    return "<f4";
}
template <>
const char* npy_descr<double>() {
    return "<f8";
}
template <>
const char* npy_descr<std::uint8_t>() {
    return "|u1";
}
template <>
const char* npy_descr<std::int16_t>() {
    return "<i2";
}
template <>
const char* npy_descr<std::uint16_t>() {
    return "<u2";
}
template <>
const char* npy_descr<std::int64_t>() {
    return "<i8";
}
template <>
const char* npy_descr<std::uint64_t>() {
    return "<u8";
}

namespace {
const unsigned char kMagic[8] = {0x93, 'N', 'U', 'M', 'P', 'Y', 0x01, 0x00};
}

std::vector<unsigned char> npy_encode(const std::string& descr,
                                      const std::vector<std::int64_t>& shape,
                                      const unsigned char* payload, std::size_t nbytes) {
    std::string dict = "{'descr': '" + descr + "', 'fortran_order': False, 'shape': (";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        dict += std::to_string(shape[i]);
        if (shape.size() == 1 || i + 1 < shape.size()) dict += ",";
        if (i + 1 < shape.size()) dict += " ";
    }
    dict += "), }";
    // pad with spaces so the full preamble is a multiple of 64, newline-terminated
    std::size_t total = 10 + dict.size() + 1;
    const std::size_t padded = (total + 63) / 64 * 64;
    dict.append(padded - total, ' ');
    dict += '\n';

    std::vector<unsigned char> out;
    out.reserve(padded + nbytes);
    out.insert(out.end(), kMagic, kMagic + 8);
    const std::uint16_t hlen = static_cast<std::uint16_t>(dict.size());
    out.push_back(static_cast<unsigned char>(hlen & 0xff));
    out.push_back(static_cast<unsigned char>(hlen >> 8));
    out.insert(out.end(), dict.begin(), dict.end());
    out.insert(out.end(), payload, payload + nbytes);
    return out;
}

NpyArray npy_decode(const std::vector<unsigned char>& bytes) {
    if (bytes.size() < 10 || std::memcmp(bytes.data(), kMagic, 6) != 0)
        throw CorruptArchive("not an NPY array (bad magic)");
    if (bytes[6] != 1) throw CorruptArchive("unsupported NPY version");
    const std::size_t hlen = bytes[8] | (static_cast<std::size_t>(bytes[9]) << 8);
    if (10 + hlen > bytes.size()) throw CorruptArchive("NPY header truncated");
    const std::string hdr(reinterpret_cast<const char*>(bytes.data()) + 10, hlen);

    NpyArray a;
    // descr
    std::size_t p = hdr.find("'descr'");
    if (p == std::string::npos) throw CorruptArchive("NPY header missing descr");
    p = hdr.find('\'', p + 7);
    std::size_t q = hdr.find('\'', p + 1);
    if (p == std::string::npos || q == std::string::npos) throw CorruptArchive("bad NPY descr");
    a.descr = hdr.substr(p + 1, q - p - 1);
    // fortran_order
    p = hdr.find("'fortran_order'");
    if (p == std::string::npos) throw CorruptArchive("NPY header missing fortran_order");
    p = hdr.find(':', p);
    while (p < hdr.size() && (hdr[p] == ':' || hdr[p] == ' ')) ++p;
    if (hdr.compare(p, 5, "False") != 0)
        throw CorruptArchive("Fortran-ordered NPY arrays are not supported");
    // shape
    p = hdr.find("'shape'");
    if (p == std::string::npos) throw CorruptArchive("NPY header missing shape");
    p = hdr.find('(', p);
    q = hdr.find(')', p);
    if (p == std::string::npos || q == std::string::npos) throw CorruptArchive("bad NPY shape");
    std::string tup = hdr.substr(p + 1, q - p - 1);
    std::int64_t cur = 0;
    bool have = false;
    for (char c : tup) {
        if (c >= '0' && c <= '9') {
            cur = cur * 10 + (c - '0');
            have = true;
        } else if (c == ',') {
            if (have) a.shape.push_back(cur);
            cur = 0;
            have = false;
        } else if (c != ' ') {
            throw CorruptArchive("bad NPY shape tuple");
        }
    }
    if (have) a.shape.push_back(cur);

    a.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(10 + hlen), bytes.end());
    return a;
}

} // namespace voxelseg
