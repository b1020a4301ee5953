#include "voxelseg/ops.hpp"

#include <algorithm>
#include <cmath>

namespace voxelseg::ops {

namespace {

template <typename T>
void check_feature_map(const Tensor<T>& x, const char* what) {
    if (x.rank() != 5) throw ShapeMismatch(std::string(what) + " must be rank 5, got " + shape_str(x.shape()));
}

} // namespace

template <typename T>
Tensor<T> conv3d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    check_feature_map(x, "conv3d input");
    if (w.rank() != 5) throw ShapeMismatch("conv3d kernel must be rank 5");
    const std::int64_t N = x.dim(0), D = x.dim(1), H = x.dim(2), W = x.dim(3), Ci = x.dim(4);
    const std::int64_t K = w.dim(0), Co = w.dim(4);
    if (w.dim(1) != K || w.dim(2) != K || (K % 2) == 0)
        throw ShapeMismatch("conv3d kernel must be cubic with odd extent");
    if (w.dim(3) != Ci) throw ShapeMismatch("conv3d kernel c_in mismatch");
    if (b.size() != Co) throw ShapeMismatch("conv3d bias length mismatch");
    const std::int64_t pad = K / 2;

    Tensor<T> y({N, D, H, W, Co});
    const T* xp = x.data();
    const T* wp = w.data();
    const T* bp = b.data();
    T* yp = y.data();

#pragma omp parallel
    {
        std::vector<T> acc(static_cast<std::size_t>(Co));
#pragma omp for collapse(3) schedule(static)
        for (std::int64_t n = 0; n < N; ++n)
            for (std::int64_t d = 0; d < D; ++d)
                for (std::int64_t h = 0; h < H; ++h) {
                    const std::int64_t alo = std::max<std::int64_t>(0, pad - d);
                    const std::int64_t ahi = std::min<std::int64_t>(K, D + pad - d);
                    const std::int64_t blo = std::max<std::int64_t>(0, pad - h);
                    const std::int64_t bhi = std::min<std::int64_t>(K, H + pad - h);
                    for (std::int64_t ww = 0; ww < W; ++ww) {
                        const std::int64_t clo = std::max<std::int64_t>(0, pad - ww);
                        const std::int64_t chi = std::min<std::int64_t>(K, W + pad - ww);
                        for (std::int64_t o = 0; o < Co; ++o) acc[static_cast<std::size_t>(o)] = bp[o];
                        for (std::int64_t a = alo; a < ahi; ++a) {
                            const std::int64_t zd = d + a - pad;
                            for (std::int64_t bb = blo; bb < bhi; ++bb) {
                                const std::int64_t zh = h + bb - pad;
                                const T* xrow = xp + (((n * D + zd) * H + zh) * W + (ww + clo - pad)) * Ci;
                                const T* wbase = wp + (((a * K + bb) * K + clo) * Ci) * Co;
                                for (std::int64_t c = clo; c < chi; ++c) {
                                    for (std::int64_t i = 0; i < Ci; ++i) {
                                        const T xv = xrow[i];
                                        const T* wrow = wbase + i * Co;
                                        T* arow = acc.data();
                                        for (std::int64_t o = 0; o < Co; ++o) arow[o] += xv * wrow[o];
                                    }
                                    xrow += Ci;
                                    wbase += Ci * Co;
                                }
                            }
                        }
                        T* yrow = yp + (((n * D + d) * H + h) * W + ww) * Co;
                        for (std::int64_t o = 0; o < Co; ++o) yrow[o] = acc[static_cast<std::size_t>(o)];
                    }
                }
    }
    return y;
}

template <typename T>
ConvGrads<T> conv3d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                             bool need_dx) {
    check_feature_map(x, "conv3d input");
    const std::int64_t N = x.dim(0), D = x.dim(1), H = x.dim(2), W = x.dim(3), Ci = x.dim(4);
    const std::int64_t K = w.dim(0), Co = w.dim(4);
    const std::int64_t pad = K / 2;
    if (dy.rank() != 5 || dy.dim(0) != N || dy.dim(1) != D || dy.dim(2) != H || dy.dim(3) != W ||
        dy.dim(4) != Co)
        throw ShapeMismatch("conv3d_backward dy shape mismatch");

    ConvGrads<T> g;
    g.dw = Tensor<T>(w.shape());
    g.db = Tensor<T>({Co});
    const T* xp = x.data();
    const T* wp = w.data();
    const T* dyp = dy.data();

    // db: one serial pass over dy, fixed order
    {
        T* dbp = g.db.data();
        const std::int64_t voxels = N * D * H * W;
        for (std::int64_t v = 0; v < voxels; ++v) {
            const T* row = dyp + v * Co;
            for (std::int64_t o = 0; o < Co; ++o) dbp[o] += row[o];
        }
    }

    // dw: each (a,b,c) tap owns its Ci x Co tile, accumulated over voxels in
    // fixed order; taps are independent so the tap loop parallelizes.
    {
        T* dwp = g.dw.data();
        const std::int64_t taps = K * K * K;
#pragma omp parallel for schedule(static)
        for (std::int64_t tap = 0; tap < taps; ++tap) {
            const std::int64_t a = tap / (K * K);
            const std::int64_t bb = (tap / K) % K;
            const std::int64_t cc = tap % K;
            T* tile = dwp + tap * Ci * Co;
            for (std::int64_t n = 0; n < N; ++n)
                for (std::int64_t d = 0; d < D; ++d) {
                    const std::int64_t zd = d + a - pad;
                    if (zd < 0 || zd >= D) continue;
                    for (std::int64_t h = 0; h < H; ++h) {
                        const std::int64_t zh = h + bb - pad;
                        if (zh < 0 || zh >= H) continue;
                        const std::int64_t wlo = std::max<std::int64_t>(0, pad - cc);
                        const std::int64_t whi = std::min<std::int64_t>(W, W + pad - cc);
                        const T* xrow = xp + (((n * D + zd) * H + zh) * W + (wlo + cc - pad)) * Ci;
                        const T* dyrow = dyp + (((n * D + d) * H + h) * W + wlo) * Co;
                        for (std::int64_t ww = wlo; ww < whi; ++ww) {
                            for (std::int64_t i = 0; i < Ci; ++i) {
                                const T xv = xrow[i];
                                T* trow = tile + i * Co;
                                for (std::int64_t o = 0; o < Co; ++o) trow[o] += xv * dyrow[o];
                            }
                            xrow += Ci;
                            dyrow += Co;
                        }
                    }
                }
        }
    }

    if (need_dx) {
        g.dx = Tensor<T>(x.shape());
        T* dxp = g.dx.data();
#pragma omp parallel
        {
            std::vector<T> acc(static_cast<std::size_t>(Ci));
#pragma omp for collapse(3) schedule(static)
            for (std::int64_t n = 0; n < N; ++n)
                for (std::int64_t d = 0; d < D; ++d)
                    for (std::int64_t h = 0; h < H; ++h)
                        for (std::int64_t ww = 0; ww < W; ++ww) {
                            std::fill(acc.begin(), acc.end(), T(0));
                            // output position od = d + pad - a must be in range
                            for (std::int64_t a = 0; a < K; ++a) {
                                const std::int64_t od = d + pad - a;
                                if (od < 0 || od >= D) continue;
                                for (std::int64_t bb = 0; bb < K; ++bb) {
                                    const std::int64_t oh = h + pad - bb;
                                    if (oh < 0 || oh >= H) continue;
                                    for (std::int64_t cc = 0; cc < K; ++cc) {
                                        const std::int64_t ow = ww + pad - cc;
                                        if (ow < 0 || ow >= W) continue;
                                        const T* dyrow = dyp + (((n * D + od) * H + oh) * W + ow) * Co;
                                        const T* wbase = wp + ((a * K + bb) * K + cc) * Ci * Co;
                                        for (std::int64_t i = 0; i < Ci; ++i) {
                                            const T* wrow = wbase + i * Co;
                                            T s = T(0);
                                            for (std::int64_t o = 0; o < Co; ++o) s += dyrow[o] * wrow[o];
                                            acc[static_cast<std::size_t>(i)] += s;
                                        }
                                    }
                                }
                            }
                            T* dxrow = dxp + (((n * D + d) * H + h) * W + ww) * Ci;
                            for (std::int64_t i = 0; i < Ci; ++i) dxrow[i] = acc[static_cast<std::size_t>(i)];
                        }
        }
    }
    return g;
}

template <typename T>
Tensor<T> convtrans3d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    check_feature_map(x, "convtrans3d input");
    if (w.rank() != 5 || w.dim(0) != 2 || w.dim(1) != 2 || w.dim(2) != 2)
        throw ShapeMismatch("convtrans3d kernel must be (2,2,2,Co,Ci)");
    const std::int64_t N = x.dim(0), D = x.dim(1), H = x.dim(2), W = x.dim(3), Ci = x.dim(4);
    const std::int64_t Co = w.dim(3);
    if (w.dim(4) != Ci) throw ShapeMismatch("convtrans3d kernel c_in mismatch");
    if (b.size() != Co) throw ShapeMismatch("convtrans3d bias length mismatch");

    Tensor<T> y({N, 2 * D, 2 * H, 2 * W, Co});
    const T* xp = x.data();
    const T* wp = w.data();
    const T* bp = b.data();
    T* yp = y.data();
    const std::int64_t OD = 2 * D, OH = 2 * H, OW = 2 * W;

#pragma omp parallel for collapse(3) schedule(static)
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t od = 0; od < OD; ++od)
            for (std::int64_t oh = 0; oh < OH; ++oh) {
                const std::int64_t a = od & 1, d = od >> 1;
                const std::int64_t bb = oh & 1, h = oh >> 1;
                for (std::int64_t ow = 0; ow < OW; ++ow) {
                    const std::int64_t cc = ow & 1, ww = ow >> 1;
                    const T* xrow = xp + (((n * D + d) * H + h) * W + ww) * Ci;
                    const T* wtap = wp + ((a * 2 + bb) * 2 + cc) * Co * Ci;
                    T* yrow = yp + (((n * OD + od) * OH + oh) * OW + ow) * Co;
                    for (std::int64_t o = 0; o < Co; ++o) {
                        const T* wrow = wtap + o * Ci;
                        T s = bp[o];
                        for (std::int64_t i = 0; i < Ci; ++i) s += xrow[i] * wrow[i];
                        yrow[o] = s;
                    }
                }
            }
    return y;
}

template <typename T>
ConvGrads<T> convtrans3d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                                  bool need_dx) {
    const std::int64_t N = x.dim(0), D = x.dim(1), H = x.dim(2), W = x.dim(3), Ci = x.dim(4);
    const std::int64_t Co = w.dim(3);
    const std::int64_t OD = 2 * D, OH = 2 * H, OW = 2 * W;
    if (dy.rank() != 5 || dy.dim(0) != N || dy.dim(1) != OD || dy.dim(2) != OH ||
        dy.dim(3) != OW || dy.dim(4) != Co)
        throw ShapeMismatch("convtrans3d_backward dy shape mismatch");

    ConvGrads<T> g;
    g.dw = Tensor<T>(w.shape());
    g.db = Tensor<T>({Co});
    const T* xp = x.data();
    const T* wp = w.data();
    const T* dyp = dy.data();

    {
        T* dbp = g.db.data();
        const std::int64_t voxels = N * OD * OH * OW;
        for (std::int64_t v = 0; v < voxels; ++v) {
            const T* row = dyp + v * Co;
            for (std::int64_t o = 0; o < Co; ++o) dbp[o] += row[o];
        }
    }

    {
        T* dwp = g.dw.data();
#pragma omp parallel for schedule(static)
        for (std::int64_t tap = 0; tap < 8; ++tap) {
            const std::int64_t a = tap >> 2, bb = (tap >> 1) & 1, cc = tap & 1;
            T* tile = dwp + tap * Co * Ci;
            for (std::int64_t n = 0; n < N; ++n)
                for (std::int64_t d = 0; d < D; ++d)
                    for (std::int64_t h = 0; h < H; ++h)
                        for (std::int64_t ww = 0; ww < W; ++ww) {
                            const T* xrow = xp + (((n * D + d) * H + h) * W + ww) * Ci;
                            const T* dyrow =
                                dyp + (((n * OD + 2 * d + a) * OH + 2 * h + bb) * OW + 2 * ww + cc) * Co;
                            for (std::int64_t o = 0; o < Co; ++o) {
                                const T dv = dyrow[o];
                                T* trow = tile + o * Ci;
                                for (std::int64_t i = 0; i < Ci; ++i) trow[i] += dv * xrow[i];
                            }
                        }
        }
    }

    if (need_dx) {
        g.dx = Tensor<T>(x.shape());
        T* dxp = g.dx.data();
#pragma omp parallel
        {
            std::vector<T> acc(static_cast<std::size_t>(Ci));
#pragma omp for collapse(3) schedule(static)
            for (std::int64_t n = 0; n < N; ++n)
                for (std::int64_t d = 0; d < D; ++d)
                    for (std::int64_t h = 0; h < H; ++h)
                        for (std::int64_t ww = 0; ww < W; ++ww) {
                            std::fill(acc.begin(), acc.end(), T(0));
                            for (std::int64_t tap = 0; tap < 8; ++tap) {
                                const std::int64_t a = tap >> 2, bb = (tap >> 1) & 1, cc = tap & 1;
                                const T* dyrow =
                                    dyp +
                                    (((n * OD + 2 * d + a) * OH + 2 * h + bb) * OW + 2 * ww + cc) * Co;
                                const T* wtap = wp + tap * Co * Ci;
                                for (std::int64_t o = 0; o < Co; ++o) {
                                    const T dv = dyrow[o];
                                    const T* wrow = wtap + o * Ci;
                                    for (std::int64_t i = 0; i < Ci; ++i)
                                        acc[static_cast<std::size_t>(i)] += dv * wrow[i];
                                }
                            }
                            T* dxrow = dxp + (((n * D + d) * H + h) * W + ww) * Ci;
                            for (std::int64_t i = 0; i < Ci; ++i) dxrow[i] = acc[static_cast<std::size_t>(i)];
                        }
        }
    }
    return g;
}

template <typename T>
PoolOut<T> maxpool3d_forward(const Tensor<T>& x) {
    check_feature_map(x, "maxpool input");
    const std::int64_t N = x.dim(0), D = x.dim(1), H = x.dim(2), W = x.dim(3), C = x.dim(4);
    if (D % 2 || H % 2 || W % 2)
        throw OddSpatialDim("maxpool3d needs even spatial dims, got " + shape_str(x.shape()));
    const std::int64_t OD = D / 2, OH = H / 2, OW = W / 2;

    PoolOut<T> out;
    out.y = Tensor<T>({N, OD, OH, OW, C});
    out.argmax = Tensor<std::int64_t>({N, OD, OH, OW, C});
    const T* xp = x.data();
    T* yp = out.y.data();
    std::int64_t* ap = out.argmax.data();

#pragma omp parallel for collapse(3) schedule(static)
    for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t od = 0; od < OD; ++od)
            for (std::int64_t oh = 0; oh < OH; ++oh)
                for (std::int64_t ow = 0; ow < OW; ++ow)
                    for (std::int64_t c = 0; c < C; ++c) {
                        T best = T(0);
                        std::int64_t besti = -1;
                        // scan in increasing flat-index order; strict >
                        // keeps the first (lowest-index) maximum
                        for (std::int64_t dz = 0; dz < 2; ++dz)
                            for (std::int64_t dyy = 0; dyy < 2; ++dyy)
                                for (std::int64_t dx = 0; dx < 2; ++dx) {
                                    const std::int64_t fi =
                                        (((n * D + 2 * od + dz) * H + 2 * oh + dyy) * W + 2 * ow + dx) * C + c;
                                    const T v = xp[fi];
                                    if (besti < 0 || v > best) {
                                        best = v;
                                        besti = fi;
                                    }
                                }
                        const std::int64_t oi = (((n * OD + od) * OH + oh) * OW + ow) * C + c;
                        yp[oi] = best;
                        ap[oi] = besti;
                    }
    return out;
}

template <typename T>
Tensor<T> maxpool3d_backward(const Tensor<T>& dy, const Tensor<std::int64_t>& argmax,
                             const std::vector<std::int64_t>& input_shape) {
    if (dy.shape() != argmax.shape()) throw ShapeMismatch("maxpool3d_backward argmax mismatch");
    Tensor<T> dx(input_shape);
    T* dxp = dx.data();
    const T* dyp = dy.data();
    const std::int64_t* ap = argmax.data();
    const std::int64_t n = dy.size();
    // each pool window contributes to exactly one input element per channel,
    // so the scatter is collision-free
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) dxp[ap[i]] += dyp[i];
    return dx;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    Tensor<T> y(x.shape());
    const T* xp = x.data();
    T* yp = y.data();
    const std::int64_t n = x.size();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) yp[i] = xp[i] > T(0) ? xp[i] : T(0);
    return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& dy) {
    if (!x.same_shape(dy)) throw ShapeMismatch("relu_backward shape mismatch");
    Tensor<T> dx(x.shape());
    const T* xp = x.data();
    const T* dyp = dy.data();
    T* dxp = dx.data();
    const std::int64_t n = x.size();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) dxp[i] = xp[i] > T(0) ? dyp[i] : T(0);
    return dx;
}

template <typename T>
Tensor<T> softmax_channels(const Tensor<T>& x) {
    if (x.rank() < 1) throw ShapeMismatch("softmax needs a channel axis");
    const std::int64_t C = x.dim(x.rank() - 1);
    const std::int64_t rows = x.size() / std::max<std::int64_t>(C, 1);
    Tensor<T> y(x.shape());
    const T* xp = x.data();
    T* yp = y.data();
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < rows; ++r) {
        const T* in = xp + r * C;
        T* out = yp + r * C;
        T mx = in[0];
        for (std::int64_t c = 1; c < C; ++c) mx = std::max(mx, in[c]);
        T sum = T(0);
        for (std::int64_t c = 0; c < C; ++c) {
            out[c] = std::exp(in[c] - mx);
            sum += out[c];
        }
        const T inv = T(1) / sum;
        for (std::int64_t c = 0; c < C; ++c) out[c] *= inv;
    }
    return y;
}

template <typename T>
Tensor<T> softmax_backward(const Tensor<T>& probs, const Tensor<T>& dprobs) {
    if (!probs.same_shape(dprobs)) throw ShapeMismatch("softmax_backward shape mismatch");
    const std::int64_t C = probs.dim(probs.rank() - 1);
    const std::int64_t rows = probs.size() / std::max<std::int64_t>(C, 1);
    Tensor<T> dx(probs.shape());
    const T* pp = probs.data();
    const T* dp = dprobs.data();
    T* op = dx.data();
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < rows; ++r) {
        const T* p = pp + r * C;
        const T* d = dp + r * C;
        T* o = op + r * C;
        T dot = T(0);
        for (std::int64_t c = 0; c < C; ++c) dot += p[c] * d[c];
        for (std::int64_t c = 0; c < C; ++c) o[c] = p[c] * (d[c] - dot);
    }
    return dx;
}

template <typename T>
Tensor<T> dropout_forward(const Tensor<T>& x, double rate, bool train, Rng& rng,
                          Tensor<std::uint8_t>* mask_out) {
    if (rate < 0.0 || rate >= 1.0) throw BadRate("dropout rate must be in [0,1)");
    if (!train || rate == 0.0) {
        if (mask_out) *mask_out = Tensor<std::uint8_t>();
        return x;
    }
    const std::uint64_t seed = rng.fork();
    const std::int64_t n = x.size();
    Tensor<std::uint8_t> mask(x.shape());
    Tensor<T> y(x.shape());
    const T scale = T(1.0 / (1.0 - rate));
    const T* xp = x.data();
    T* yp = y.data();
    std::uint8_t* mp = mask.data();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const bool keep = Rng::to_unit_double(Rng::at(seed, static_cast<std::uint64_t>(i))) >= rate;
        mp[i] = keep ? 1 : 0;
        yp[i] = keep ? xp[i] * scale : T(0);
    }
    if (mask_out) *mask_out = std::move(mask);
    return y;
}

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& dy, const Tensor<std::uint8_t>& mask, double rate) {
    if (mask.empty()) return dy; // forward was identity
    if (dy.shape() != mask.shape()) throw ShapeMismatch("dropout_backward mask mismatch");
    Tensor<T> dx(dy.shape());
    const T scale = T(1.0 / (1.0 - rate));
    const T* dyp = dy.data();
    const std::uint8_t* mp = mask.data();
    T* dxp = dx.data();
    const std::int64_t n = dy.size();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) dxp[i] = mp[i] ? dyp[i] * scale : T(0);
    return dx;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != b.rank() || a.rank() < 1) throw ShapeMismatch("concat rank mismatch");
    for (int i = 0; i + 1 < a.rank(); ++i)
        if (a.dim(i) != b.dim(i)) throw ShapeMismatch("concat non-channel dim mismatch");
    const std::int64_t Ca = a.dim(a.rank() - 1), Cb = b.dim(b.rank() - 1);
    std::vector<std::int64_t> shape = a.shape();
    shape.back() = Ca + Cb;
    Tensor<T> y(shape);
    const std::int64_t rows = a.size() / std::max<std::int64_t>(Ca, 1);
    const T* ap = a.data();
    const T* bp = b.data();
    T* yp = y.data();
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < rows; ++r) {
        T* out = yp + r * (Ca + Cb);
        const T* ain = ap + r * Ca;
        const T* bin = bp + r * Cb;
        for (std::int64_t c = 0; c < Ca; ++c) out[c] = ain[c];
        for (std::int64_t c = 0; c < Cb; ++c) out[Ca + c] = bin[c];
    }
    return y;
}

template <typename T>
void split_channels(const Tensor<T>& d_concat, Tensor<T>& da, Tensor<T>& db) {
    const std::int64_t Ca = da.dim(da.rank() - 1), Cb = db.dim(db.rank() - 1);
    if (d_concat.dim(d_concat.rank() - 1) != Ca + Cb)
        throw ShapeMismatch("split_channels channel mismatch");
    const std::int64_t rows = d_concat.size() / (Ca + Cb);
    const T* dp = d_concat.data();
    T* ap = da.data();
    T* bp = db.data();
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < rows; ++r) {
        const T* in = dp + r * (Ca + Cb);
        T* aout = ap + r * Ca;
        T* bout = bp + r * Cb;
        for (std::int64_t c = 0; c < Ca; ++c) aout[c] = in[c];
        for (std::int64_t c = 0; c < Cb; ++c) bout[c] = in[Ca + c];
    }
}

template <typename T>
Tensor<T> he_normal_init(const std::vector<std::int64_t>& shape, std::int64_t fan_in, Rng& rng) {
    Tensor<T> t(shape);
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    const std::int64_t n = t.size();
    T* p = t.data();
    for (std::int64_t i = 0; i < n; ++i) p[i] = static_cast<T>(rng.next_normal() * stddev);
    return t;
}

template <typename T>
void adam_step(std::vector<Tensor<T>>& params, const std::vector<Tensor<T>>& grads,
               AdamState<T>& state) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw ShapeMismatch("adam_step parameter/gradient count mismatch");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    const T b1 = static_cast<T>(state.beta1), b2 = static_cast<T>(state.beta2);
    const T ib1 = static_cast<T>(1.0 - state.beta1), ib2 = static_cast<T>(1.0 - state.beta2);
    const T inv_bc1 = static_cast<T>(1.0 / bc1), inv_bc2 = static_cast<T>(1.0 / bc2);
    const T lr = static_cast<T>(state.lr), eps = static_cast<T>(state.epsilon);
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (!params[k].same_shape(grads[k])) throw ShapeMismatch("adam_step shape mismatch");
        T* p = params[k].data();
        const T* g = grads[k].data();
        T* m = state.m[k].data();
        T* v = state.v[k].data();
        const std::int64_t n = params[k].size();
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i) {
            m[i] = b1 * m[i] + ib1 * g[i];
            v[i] = b2 * v[i] + ib2 * g[i] * g[i];
            const T mhat = m[i] * inv_bc1;
            const T vhat = v[i] * inv_bc2;
            p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

#define VOXELSEG_INSTANTIATE(T)                                                                   \
    template Tensor<T> conv3d_forward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);  \
    template ConvGrads<T> conv3d_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, bool); \
    template Tensor<T> convtrans3d_forward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&); \
    template ConvGrads<T> convtrans3d_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, bool); \
    template PoolOut<T> maxpool3d_forward<T>(const Tensor<T>&);                                   \
    template Tensor<T> maxpool3d_backward<T>(const Tensor<T>&, const Tensor<std::int64_t>&, const std::vector<std::int64_t>&); \
    template Tensor<T> relu<T>(const Tensor<T>&);                                                 \
    template Tensor<T> relu_backward<T>(const Tensor<T>&, const Tensor<T>&);                      \
    template Tensor<T> softmax_channels<T>(const Tensor<T>&);                                     \
    template Tensor<T> softmax_backward<T>(const Tensor<T>&, const Tensor<T>&);                   \
    template Tensor<T> dropout_forward<T>(const Tensor<T>&, double, bool, Rng&, Tensor<std::uint8_t>*); \
    template Tensor<T> dropout_backward<T>(const Tensor<T>&, const Tensor<std::uint8_t>&, double); \
    template Tensor<T> concat_channels<T>(const Tensor<T>&, const Tensor<T>&);                    \
    template void split_channels<T>(const Tensor<T>&, Tensor<T>&, Tensor<T>&);                    \
    template Tensor<T> he_normal_init<T>(const std::vector<std::int64_t>&, std::int64_t, Rng&);   \
    template void adam_step<T>(std::vector<Tensor<T>>&, const std::vector<Tensor<T>>&, AdamState<T>&)

VOXELSEG_INSTANTIATE(float);
VOXELSEG_INSTANTIATE(double);

#undef VOXELSEG_INSTANTIATE

} // namespace voxelseg::ops
