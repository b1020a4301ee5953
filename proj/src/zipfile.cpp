#include "voxelseg/zipfile.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "voxelseg/errors.hpp"

namespace voxelseg {

namespace {

constexpr std::uint32_t kLocalSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEocdSig = 0x06054b50;
// fixed DOS timestamp: 1980-01-01 00:00:00
constexpr std::uint16_t kDosTime = 0;
constexpr std::uint16_t kDosDate = 0x0021;

void put16(std::vector<unsigned char>& v, std::uint16_t x) {
    v.push_back(static_cast<unsigned char>(x & 0xff));
    v.push_back(static_cast<unsigned char>(x >> 8));
}

void put32(std::vector<unsigned char>& v, std::uint32_t x) {
    for (int i = 0; i < 4; ++i) v.push_back(static_cast<unsigned char>((x >> (8 * i)) & 0xff));
}

std::uint16_t get16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

} // namespace

void ZipWriter::add(const std::string& name, const std::vector<unsigned char>& bytes) {
    Member m;
    m.name = name;
    m.bytes = bytes;
    m.crc = static_cast<std::uint32_t>(
        crc32(0, bytes.empty() ? Z_NULL : bytes.data(), static_cast<uInt>(bytes.size())));
    members_.push_back(std::move(m));
}

void ZipWriter::add(const std::string& name, const std::string& text) {
    add(name, std::vector<unsigned char>(text.begin(), text.end()));
}

std::vector<unsigned char> ZipWriter::finish() const {
    std::vector<unsigned char> out;
    std::vector<std::uint32_t> offsets;
    offsets.reserve(members_.size());

    for (const Member& m : members_) {
        offsets.push_back(static_cast<std::uint32_t>(out.size()));
        put32(out, kLocalSig);
        put16(out, 20);                                          // version needed
        put16(out, 0);                                           // flags
        put16(out, 0);                                           // method: stored
        put16(out, kDosTime);
        put16(out, kDosDate);
        put32(out, m.crc);
        put32(out, static_cast<std::uint32_t>(m.bytes.size())); // compressed
        put32(out, static_cast<std::uint32_t>(m.bytes.size())); // uncompressed
        put16(out, static_cast<std::uint16_t>(m.name.size()));
        put16(out, 0);                                           // extra length
        out.insert(out.end(), m.name.begin(), m.name.end());
        out.insert(out.end(), m.bytes.begin(), m.bytes.end());
    }

    const std::uint32_t cd_start = static_cast<std::uint32_t>(out.size());
    for (std::size_t i = 0; i < members_.size(); ++i) {
        const Member& m = members_[i];
        put32(out, kCentralSig);
        put16(out, 20); // version made by
        put16(out, 20); // version needed
        put16(out, 0);
        put16(out, 0);
        put16(out, kDosTime);
        put16(out, kDosDate);
        put32(out, m.crc);
        put32(out, static_cast<std::uint32_t>(m.bytes.size()));
        put32(out, static_cast<std::uint32_t>(m.bytes.size()));
        put16(out, static_cast<std::uint16_t>(m.name.size()));
        put16(out, 0); // extra
        put16(out, 0); // comment
        put16(out, 0); // disk number
        put16(out, 0); // internal attrs
        put32(out, 0); // external attrs
        put32(out, offsets[i]);
        out.insert(out.end(), m.name.begin(), m.name.end());
    }
    const std::uint32_t cd_size = static_cast<std::uint32_t>(out.size()) - cd_start;

    put32(out, kEocdSig);
    put16(out, 0);
    put16(out, 0);
    put16(out, static_cast<std::uint16_t>(members_.size()));
    put16(out, static_cast<std::uint16_t>(members_.size()));
    put32(out, cd_size);
    put32(out, cd_start);
    put16(out, 0); // comment length
    return out;
}

void ZipWriter::write_file(const std::string& path) const {
    const std::vector<unsigned char> bytes = finish();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot create " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("short write on " + path);
}

ZipReader ZipReader::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    in.seekg(0, std::ios::end);
    const std::streamoff n = in.tellg();
    in.seekg(0);
    std::vector<unsigned char> buf(static_cast<std::size_t>(n));
    if (n > 0) in.read(reinterpret_cast<char*>(buf.data()), n);
    if (!in) throw IoError("short read on " + path);
    return from_bytes(std::move(buf));
}

ZipReader ZipReader::from_bytes(std::vector<unsigned char> bytes) {
    ZipReader r;
    r.bytes_ = std::move(bytes);
    r.parse();
    return r;
}

void ZipReader::parse() {
    // EOCD is within the last 22 + 65535 bytes; members have no comments here
    if (bytes_.size() < 22) throw CorruptArchive("too small to be a zip archive");
    std::int64_t eocd = -1;
    const std::int64_t lo =
        std::max<std::int64_t>(0, static_cast<std::int64_t>(bytes_.size()) - 22 - 65535);
    for (std::int64_t i = static_cast<std::int64_t>(bytes_.size()) - 22; i >= lo; --i) {
        if (get32(&bytes_[static_cast<std::size_t>(i)]) == kEocdSig) {
            eocd = i;
            break;
        }
    }
    if (eocd < 0) throw CorruptArchive("end-of-central-directory record not found");

    const unsigned char* e = &bytes_[static_cast<std::size_t>(eocd)];
    const std::uint16_t count = get16(e + 10);
    const std::uint32_t cd_size = get32(e + 12);
    const std::uint32_t cd_start = get32(e + 16);
    if (static_cast<std::uint64_t>(cd_start) + cd_size > bytes_.size())
        throw CorruptArchive("central directory out of bounds");

    std::uint64_t p = cd_start;
    for (std::uint16_t i = 0; i < count; ++i) {
        if (p + 46 > bytes_.size() || get32(&bytes_[p]) != kCentralSig)
            throw CorruptArchive("bad central directory entry");
        const unsigned char* c = &bytes_[p];
        const std::uint16_t method = get16(c + 10);
        const std::uint32_t crc = get32(c + 16);
        const std::uint32_t csize = get32(c + 20);
        const std::uint32_t usize = get32(c + 24);
        const std::uint16_t nlen = get16(c + 28);
        const std::uint16_t xlen = get16(c + 30);
        const std::uint16_t clen = get16(c + 32);
        const std::uint32_t off = get32(c + 42);
        if (method != 0 || csize != usize)
            throw CorruptArchive("only stored (uncompressed) members are supported");
        if (p + 46 + nlen > bytes_.size()) throw CorruptArchive("member name out of bounds");
        std::string name(reinterpret_cast<const char*>(c + 46), nlen);
        entries_[name] = Entry{off, usize, crc};
        order_.push_back(name);
        p += 46u + nlen + xlen + clen;
    }
}

std::vector<std::string> ZipReader::names() const { return order_; }

bool ZipReader::has(const std::string& name) const { return entries_.count(name) != 0; }

std::vector<unsigned char> ZipReader::extract(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw CorruptArchive("missing member: " + name);
    const Entry& en = it->second;
    if (en.offset + 30 > bytes_.size() || get32(&bytes_[en.offset]) != kLocalSig)
        throw CorruptArchive("bad local header for " + name);
    const unsigned char* l = &bytes_[en.offset];
    const std::uint16_t nlen = get16(l + 26);
    const std::uint16_t xlen = get16(l + 28);
    const std::uint64_t data_off = en.offset + 30 + nlen + xlen;
    if (data_off + en.size > bytes_.size()) throw CorruptArchive("member data truncated: " + name);
    std::vector<unsigned char> out(bytes_.begin() + static_cast<std::ptrdiff_t>(data_off),
                                   bytes_.begin() + static_cast<std::ptrdiff_t>(data_off + en.size));
    const std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(0, out.empty() ? Z_NULL : out.data(), static_cast<uInt>(out.size())));
    if (crc != en.crc) throw CorruptArchive("checksum mismatch in " + name);
    return out;
}

std::string ZipReader::extract_text(const std::string& name) const {
    const std::vector<unsigned char> b = extract(name);
    return std::string(b.begin(), b.end());
}

} // namespace voxelseg
