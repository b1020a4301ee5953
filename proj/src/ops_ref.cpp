#include "voxelseg/ops_ref.hpp"

#include <algorithm>
#include <cmath>

namespace voxelseg::refimpl {

namespace {

// value of x at (n,d,h,w,c), zero outside the spatial bounds
template <typename T>
T at_padded(const Tensor<T>& x, std::int64_t n, std::int64_t d, std::int64_t h, std::int64_t w,
            std::int64_t c) {
    if (d < 0 || d >= x.dim(1) || h < 0 || h >= x.dim(2) || w < 0 || w >= x.dim(3)) return T(0);
    return x.at({n, d, h, w, c});
}

} // namespace

template <typename T>
Tensor<T> conv3d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    const std::int64_t N = x.dim(0), D = x.dim(1), H = x.dim(2), W = x.dim(3), Ci = x.dim(4);
    const std::int64_t K = w.dim(0), Co = w.dim(4), pad = K / 2;
    Tensor<T> y({N, D, H, W, Co});
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t d = 0; d < D; ++d)
            for (std::int64_t h = 0; h < H; ++h)
                for (std::int64_t ww = 0; ww < W; ++ww)
                    for (std::int64_t o = 0; o < Co; ++o) {
                        T s = b[o];
                        for (std::int64_t a = 0; a < K; ++a)
                            for (std::int64_t bb = 0; bb < K; ++bb)
                                for (std::int64_t c = 0; c < K; ++c)
                                    for (std::int64_t i = 0; i < Ci; ++i)
                                        s += at_padded(x, n, d + a - pad, h + bb - pad, ww + c - pad, i) *
                                             w.at({a, bb, c, i, o});
                        y.at({n, d, h, ww, o}) = s;
                    }
    return y;
}

template <typename T>
ops::ConvGrads<T> conv3d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy) {
    const std::int64_t N = x.dim(0), D = x.dim(1), H = x.dim(2), W = x.dim(3), Ci = x.dim(4);
    const std::int64_t K = w.dim(0), Co = w.dim(4), pad = K / 2;
    ops::ConvGrads<T> g;
    g.dx = Tensor<T>(x.shape());
    g.dw = Tensor<T>(w.shape());
    g.db = Tensor<T>({Co});
    // scatter form: walk every output element and distribute its gradient
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t d = 0; d < D; ++d)
            for (std::int64_t h = 0; h < H; ++h)
                for (std::int64_t ww = 0; ww < W; ++ww)
                    for (std::int64_t o = 0; o < Co; ++o) {
                        const T dv = dy.at({n, d, h, ww, o});
                        g.db[o] += dv;
                        for (std::int64_t a = 0; a < K; ++a)
                            for (std::int64_t bb = 0; bb < K; ++bb)
                                for (std::int64_t c = 0; c < K; ++c) {
                                    const std::int64_t zd = d + a - pad, zh = h + bb - pad,
                                                       zw = ww + c - pad;
                                    if (zd < 0 || zd >= D || zh < 0 || zh >= H || zw < 0 || zw >= W)
                                        continue;
                                    for (std::int64_t i = 0; i < Ci; ++i) {
                                        g.dw.at({a, bb, c, i, o}) += x.at({n, zd, zh, zw, i}) * dv;
                                        g.dx.at({n, zd, zh, zw, i}) += w.at({a, bb, c, i, o}) * dv;
                                    }
                                }
                    }
    return g;
}

template <typename T>
Tensor<T> convtrans3d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    const std::int64_t N = x.dim(0), D = x.dim(1), H = x.dim(2), W = x.dim(3), Ci = x.dim(4);
    const std::int64_t Co = w.dim(3);
    Tensor<T> y({N, 2 * D, 2 * H, 2 * W, Co});
    // bias first, then scatter each input voxel through the 2^3 kernel
    for (std::int64_t i = 0; i < y.size(); ++i) y[i] = b[i % Co];
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t d = 0; d < D; ++d)
            for (std::int64_t h = 0; h < H; ++h)
                for (std::int64_t ww = 0; ww < W; ++ww)
                    for (std::int64_t a = 0; a < 2; ++a)
                        for (std::int64_t bb = 0; bb < 2; ++bb)
                            for (std::int64_t c = 0; c < 2; ++c)
                                for (std::int64_t o = 0; o < Co; ++o)
                                    for (std::int64_t i = 0; i < Ci; ++i)
                                        y.at({n, 2 * d + a, 2 * h + bb, 2 * ww + c, o}) +=
                                            x.at({n, d, h, ww, i}) * w.at({a, bb, c, o, i});
    return y;
}

template <typename T>
ops::ConvGrads<T> convtrans3d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy) {
    const std::int64_t N = x.dim(0), D = x.dim(1), H = x.dim(2), W = x.dim(3), Ci = x.dim(4);
    const std::int64_t Co = w.dim(3);
    ops::ConvGrads<T> g;
    g.dx = Tensor<T>(x.shape());
    g.dw = Tensor<T>(w.shape());
    g.db = Tensor<T>({Co});
    for (std::int64_t i = 0; i < dy.size(); ++i) g.db[i % Co] += dy[i];
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t d = 0; d < D; ++d)
            for (std::int64_t h = 0; h < H; ++h)
                for (std::int64_t ww = 0; ww < W; ++ww)
                    for (std::int64_t a = 0; a < 2; ++a)
                        for (std::int64_t bb = 0; bb < 2; ++bb)
                            for (std::int64_t c = 0; c < 2; ++c)
                                for (std::int64_t o = 0; o < Co; ++o) {
                                    const T dv = dy.at({n, 2 * d + a, 2 * h + bb, 2 * ww + c, o});
                                    for (std::int64_t i = 0; i < Ci; ++i) {
                                        g.dw.at({a, bb, c, o, i}) += x.at({n, d, h, ww, i}) * dv;
                                        g.dx.at({n, d, h, ww, i}) += w.at({a, bb, c, o, i}) * dv;
                                    }
                                }
    return g;
}

template <typename T>
ops::PoolOut<T> maxpool3d_forward(const Tensor<T>& x) {
    const std::int64_t N = x.dim(0), D = x.dim(1), H = x.dim(2), W = x.dim(3), C = x.dim(4);
    if (D % 2 || H % 2 || W % 2) throw OddSpatialDim("refimpl maxpool3d needs even spatial dims");
    ops::PoolOut<T> out;
    out.y = Tensor<T>({N, D / 2, H / 2, W / 2, C});
    out.argmax = Tensor<std::int64_t>({N, D / 2, H / 2, W / 2, C});
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t od = 0; od < D / 2; ++od)
            for (std::int64_t oh = 0; oh < H / 2; ++oh)
                for (std::int64_t ow = 0; ow < W / 2; ++ow)
                    for (std::int64_t c = 0; c < C; ++c) {
                        std::int64_t besti = x.flat({n, 2 * od, 2 * oh, 2 * ow, c});
                        T best = x[besti];
                        for (std::int64_t dz = 0; dz < 2; ++dz)
                            for (std::int64_t dyy = 0; dyy < 2; ++dyy)
                                for (std::int64_t dx = 0; dx < 2; ++dx) {
                                    const std::int64_t fi =
                                        x.flat({n, 2 * od + dz, 2 * oh + dyy, 2 * ow + dx, c});
                                    if (x[fi] > best) {
                                        best = x[fi];
                                        besti = fi;
                                    }
                                }
                        out.y.at({n, od, oh, ow, c}) = best;
                        out.argmax.at({n, od, oh, ow, c}) = besti;
                    }
    return out;
}

template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& x) {
    const std::int64_t C = x.dim(x.rank() - 1);
    const std::int64_t rows = x.size() / C;
    Tensor<T> y(x.shape());
    for (std::int64_t r = 0; r < rows; ++r) {
        T mx = x[r * C];
        for (std::int64_t c = 1; c < C; ++c) mx = std::max(mx, x[r * C + c]);
        T sum = T(0);
        for (std::int64_t c = 0; c < C; ++c) sum += std::exp(x[r * C + c] - mx);
        for (std::int64_t c = 0; c < C; ++c) y[r * C + c] = std::exp(x[r * C + c] - mx) / sum;
    }
    return y;
}

#define VOXELSEG_REF_INSTANTIATE(T)                                                               \
    template Tensor<T> conv3d_forward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);  \
    template ops::ConvGrads<T> conv3d_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&); \
    template Tensor<T> convtrans3d_forward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&); \
    template ops::ConvGrads<T> convtrans3d_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&); \
    template ops::PoolOut<T> maxpool3d_forward<T>(const Tensor<T>&);                              \
    template Tensor<T> softmax_channels<T>(const Tensor<T>&)

VOXELSEG_REF_INSTANTIATE(float);
VOXELSEG_REF_INSTANTIATE(double);

#undef VOXELSEG_REF_INSTANTIATE

} // namespace voxelseg::refimpl
