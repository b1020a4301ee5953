#ifndef VOXELSEG_OPS_REF_HPP
#define VOXELSEG_OPS_REF_HPP

#include "voxelseg/ops.hpp"

// Naive single-threaded reference kernels. These are written as the textbook
// definitions, independently of the OpenMP implementations in voxelseg::ops,
// and exist so the tests can cross-check the fast path and the benchmark has
// a baseline. Keep them dumb.
namespace voxelseg::refimpl {

template <typename T>
Tensor<T> conv3d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

template <typename T>
ops::ConvGrads<T> conv3d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy);

template <typename T>
Tensor<T> convtrans3d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

template <typename T>
ops::ConvGrads<T> convtrans3d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy);

template <typename T>
ops::PoolOut<T> maxpool3d_forward(const Tensor<T>& x);

template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& x);

} // namespace voxelseg::refimpl

#endif
