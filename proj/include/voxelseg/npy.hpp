#ifndef VOXELSEG_NPY_HPP
#define VOXELSEG_NPY_HPP

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "voxelseg/tensor.hpp"

namespace voxelseg {

// NPY v1.0 array serialization (magic \x93NUMPY, textual header, C order,
// little-endian payload).

template <typename T>
const char* npy_descr();

struct NpyArray {
    std::string descr;
    std::vector<std::int64_t> shape;
    std::vector<unsigned char> data;
};

std::vector<unsigned char> npy_encode(const std::string& descr,
                                      const std::vector<std::int64_t>& shape,
                                      const unsigned char* payload, std::size_t nbytes);

NpyArray npy_decode(const std::vector<unsigned char>& bytes);

template <typename T>
std::vector<unsigned char> npy_encode_tensor(const Tensor<T>& t) {
    return npy_encode(npy_descr<T>(), t.shape(),
                      reinterpret_cast<const unsigned char*>(t.data()), sizeof(T) * static_cast<std::size_t>(t.size()));
}

template <typename T>
Tensor<T> npy_decode_tensor(const std::vector<unsigned char>& bytes) {
    NpyArray a = npy_decode(bytes);
    if (a.descr != npy_descr<T>())
        throw CorruptArchive("npy dtype is " + a.descr + ", expected " + npy_descr<T>());
    Tensor<T> t(a.shape);
    if (a.data.size() != sizeof(T) * static_cast<std::size_t>(t.size()))
        throw CorruptArchive("npy payload length mismatch");
    std::memcpy(t.data(), a.data.data(), a.data.size());
    return t;
}

} // namespace voxelseg

#endif
