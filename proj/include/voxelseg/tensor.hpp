#ifndef VOXELSEG_TENSOR_HPP
#define VOXELSEG_TENSOR_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "voxelseg/errors.hpp"

namespace voxelseg {

// Dense row-major N-D array. Feature maps are (N, D, H, W, C) with channels
// last, so the channel axis is contiguous in memory.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::int64_t> shape)
        : shape_(std::move(shape)), data_(checked_size(shape_), T(0)) {}

    Tensor(std::vector<std::int64_t> shape, T fill)
        : shape_(std::move(shape)), data_(checked_size(shape_), fill) {}

    Tensor(std::vector<std::int64_t> shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (static_cast<std::int64_t>(data_.size()) != checked_size(shape_))
            throw ShapeMismatch("tensor data length does not match shape");
    }

    const std::vector<std::int64_t>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::int64_t dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& vec() { return data_; }
    const std::vector<T>& vec() const { return data_; }

    T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    T& at(std::initializer_list<std::int64_t> idx) { return data_[static_cast<std::size_t>(flat(idx))]; }
    const T& at(std::initializer_list<std::int64_t> idx) const {
        return data_[static_cast<std::size_t>(flat(idx))];
    }

    std::int64_t flat(std::initializer_list<std::int64_t> idx) const {
        std::int64_t f = 0;
        int i = 0;
        for (std::int64_t v : idx) {
            f = f * shape_[static_cast<std::size_t>(i)] + v;
            ++i;
        }
        return f;
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        if constexpr (std::is_floating_point_v<T>) {
            for (T v : data_)
                if (!std::isfinite(v)) return false;
        }
        return true;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (std::int64_t i = 0; i < size(); ++i)
            out[i] = static_cast<U>(data_[static_cast<std::size_t>(i)]);
        return out;
    }

    static std::int64_t checked_size(const std::vector<std::int64_t>& shape) {
        std::int64_t n = 1;
        for (std::int64_t d : shape) {
            if (d < 0) throw ShapeMismatch("negative extent");
            n *= d;
        }
        return n;
    }

private:
    std::vector<std::int64_t> shape_;
    std::vector<T> data_;
};

inline std::string shape_str(const std::vector<std::int64_t>& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + ")";
}

} // namespace voxelseg

#endif
