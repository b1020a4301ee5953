#ifndef VOXELSEG_OPS_HPP
#define VOXELSEG_OPS_HPP

#include <cstdint>
#include <vector>

#include "voxelseg/rng.hpp"
#include "voxelseg/tensor.hpp"

// Layer kernels, OpenMP-parallel. Every kernel is owner-computes: each output
// element is produced by exactly one thread with a fixed inner accumulation
// order, so results are bit-identical for any thread count. A naive serial
// twin of each kernel lives in voxelseg::refimpl (ops_ref.hpp) and is used by
// the tests as an independent oracle and by the benchmark as the baseline.
namespace voxelseg::ops {

template <typename T>
struct ConvGrads {
    Tensor<T> dx; // empty when need_dx == false
    Tensor<T> dw;
    Tensor<T> db;
};

template <typename T>
struct PoolOut {
    Tensor<T> y;
    Tensor<std::int64_t> argmax; // flat index into the pool input
};

// 3-D convolution with "same" zero padding. x: (N,D,H,W,Ci),
// w: (K,K,K,Ci,Co) with K odd, b: (Co). Output (N,D,H,W,Co).
template <typename T>
Tensor<T> conv3d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

template <typename T>
ConvGrads<T> conv3d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                             bool need_dx = true);

// Transposed 3-D convolution, kernel (2,2,2,Co,Ci), stride 2, no padding.
// Doubles each spatial dimension; with k == stride every output voxel
// receives exactly one kernel tap.
template <typename T>
Tensor<T> convtrans3d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

template <typename T>
ConvGrads<T> convtrans3d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                                  bool need_dx = true);

// 2x2x2 max pooling, stride 2. Ties break to the lowest flat index.
template <typename T>
PoolOut<T> maxpool3d_forward(const Tensor<T>& x);

template <typename T>
Tensor<T> maxpool3d_backward(const Tensor<T>& dy, const Tensor<std::int64_t>& argmax,
                             const std::vector<std::int64_t>& input_shape);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

// dx = dy where x > 0, else 0 (derivative at 0 is 0)
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& dy);

// per-voxel softmax over the last (channel) axis, max-subtracted
template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& x);

// pull dL/dprobs back through the softmax: dx_c = p_c * (dy_c - sum_k p_k dy_k)
template <typename T>
Tensor<T> softmax_backward(const Tensor<T>& probs, const Tensor<T>& dprobs);

// Inverted dropout. Train mode zeroes each element with probability `rate`
// and scales survivors by 1/(1-rate); infer mode is the identity. The keep
// mask is derived counter-style from one seed drawn off `rng`, so mask
// generation parallelizes without losing determinism.
template <typename T>
Tensor<T> dropout_forward(const Tensor<T>& x, double rate, bool train, Rng& rng,
                          Tensor<std::uint8_t>* mask_out = nullptr);

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& dy, const Tensor<std::uint8_t>& mask, double rate);

// channel concatenation, a's channels first
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

// scatter the gradient of concat_channels back to the two inputs
template <typename T>
void split_channels(const Tensor<T>& d_concat, Tensor<T>& da, Tensor<T>& db);

// i.i.d. N(0, 2/fan_in) draws from the shared stream
template <typename T>
Tensor<T> he_normal_init(const std::vector<std::int64_t>& shape, std::int64_t fan_in, Rng& rng);

template <typename T>
struct AdamState {
    std::vector<Tensor<T>> m;
    std::vector<Tensor<T>> v;
    std::int64_t t = 0;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-7;

    void init_like(const std::vector<Tensor<T>>& params) {
        m.clear();
        v.clear();
        for (const auto& p : params) {
            m.emplace_back(p.shape());
            v.emplace_back(p.shape());
        }
    }
};

// one optimizer step over a parameter list; increments state.t first
template <typename T>
void adam_step(std::vector<Tensor<T>>& params, const std::vector<Tensor<T>>& grads,
               AdamState<T>& state);

} // namespace voxelseg::ops

#endif
