#ifndef VOXELSEG_ZIPFILE_HPP
#define VOXELSEG_ZIPFILE_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace voxelseg {

// Minimal ZIP container, stored (uncompressed) members only. Timestamps are
// pinned to a constant so identical inputs produce byte-identical archives.
class ZipWriter {
public:
    void add(const std::string& name, const std::vector<unsigned char>& bytes);
    void add(const std::string& name, const std::string& text);

    std::vector<unsigned char> finish() const;
    void write_file(const std::string& path) const;

private:
    struct Member {
        std::string name;
        std::vector<unsigned char> bytes;
        std::uint32_t crc;
    };
    std::vector<Member> members_;
};

class ZipReader {
public:
    // throws CorruptArchive on structural damage, IoError on filesystem failure
    static ZipReader from_file(const std::string& path);
    static ZipReader from_bytes(std::vector<unsigned char> bytes);

    std::vector<std::string> names() const;
    bool has(const std::string& name) const;
    // CRC-checked extraction
    std::vector<unsigned char> extract(const std::string& name) const;
    std::string extract_text(const std::string& name) const;

private:
    struct Entry {
        std::uint64_t offset; // of the local header
        std::uint32_t size;
        std::uint32_t crc;
    };
    std::vector<unsigned char> bytes_;
    std::map<std::string, Entry> entries_;
    std::vector<std::string> order_;

    void parse();
};

} // namespace voxelseg

#endif
