#pragma once

#include <cblas.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "faceseal/autograd.hpp"
#include "faceseal/random.hpp"
#include "faceseal/tensor.hpp"

namespace faceseal {

namespace detail {
// Virtualized CPUs often mask CPUID enough that OpenBLAS's dynamic-arch
// detection falls back to a generic kernel (observed ~3x slower here). Pin
// the AVX-512 kernel when the ISA is present; an existing OPENBLAS_CORETYPE
// in the environment always wins. Must run before the first BLAS call.
struct BlasKernelPin {
    BlasKernelPin() {
#if defined(__x86_64__) && defined(__GNUC__)
        if (__builtin_cpu_supports("avx512f") && __builtin_cpu_supports("avx512bw") &&
            __builtin_cpu_supports("avx512vl") && __builtin_cpu_supports("avx512dq"))
            setenv("OPENBLAS_CORETYPE", "SKYLAKEX", /*overwrite=*/0);
#endif
    }
};
inline const BlasKernelPin blas_kernel_pin{};
}  // namespace detail

// ---------------------------------------------------------------------------
// conv2d: im2col + sgemm, zero padding. Weights (Cout,Cin,kh,kw), bias (Cout).
// ---------------------------------------------------------------------------

namespace detail {

// scratch reused across conv calls; training is single-threaded but keep it
// thread-local so concurrent inference stays safe
inline std::vector<float>& conv_scratch(int which) {
    thread_local std::vector<float> buf[2];
    return buf[which];
}

// Batched layout: out(N,C,Ho,Wo) viewed as C x (N*Ho*Wo) matrix with the
// batch folded into the column index, so one GEMM covers the whole batch.
inline void im2col_batched(const float* x, int n, int c, int h, int w, int kh, int kw,
                           int stride, int pad, int ho, int wo, float* col) {
    const std::int64_t ospatial = std::int64_t(ho) * wo;
    const std::int64_t ncols = n * ospatial;
    for (int ci = 0; ci < c; ++ci)
        for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
                float* dst = col + ((std::int64_t(ci) * kh + ky) * kw + kx) * ncols;
                for (int ni = 0; ni < n; ++ni) {
                    const float* img = x + (std::int64_t(ni) * c + ci) * h * w;
                    for (int oy = 0; oy < ho; ++oy) {
                        const int iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= h) {
                            std::fill(dst, dst + wo, 0.0f);
                            dst += wo;
                            continue;
                        }
                        const float* src = img + std::int64_t(iy) * w;
                        const int x0 = -pad + kx;
                        if (stride == 1 && x0 >= 0 && x0 + wo <= w) {
                            std::copy(src + x0, src + x0 + wo, dst);
                            dst += wo;
                        } else {
                            for (int ox = 0; ox < wo; ++ox) {
                                const int ix = ox * stride + x0;
                                *dst++ = (ix >= 0 && ix < w) ? src[ix] : 0.0f;
                            }
                        }
                    }
                }
            }
}

inline void col2im_batched_accum(const float* col, int n, int c, int h, int w, int kh, int kw,
                                 int stride, int pad, int ho, int wo, float* x) {
    const std::int64_t ospatial = std::int64_t(ho) * wo;
    const std::int64_t ncols = n * ospatial;
    for (int ci = 0; ci < c; ++ci)
        for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
                const float* src = col + ((std::int64_t(ci) * kh + ky) * kw + kx) * ncols;
                for (int ni = 0; ni < n; ++ni) {
                    float* img = x + (std::int64_t(ni) * c + ci) * h * w;
                    for (int oy = 0; oy < ho; ++oy) {
                        const int iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= h) {
                            src += wo;
                            continue;
                        }
                        float* dst = img + std::int64_t(iy) * w;
                        const int x0 = -pad + kx;
                        if (stride == 1 && x0 >= 0 && x0 + wo <= w) {
                            for (int ox = 0; ox < wo; ++ox) dst[x0 + ox] += src[ox];
                            src += wo;
                        } else {
                            for (int ox = 0; ox < wo; ++ox) {
                                const int ix = ox * stride + x0;
                                if (ix >= 0 && ix < w) dst[ix] += src[ox];
                            }
                            src += wo;
                        }
                    }
                }
            }
}

// (N,C,S) <-> (C,N*S) transposes for the batched GEMM view
inline void fold_batch(const float* y, int n, int c, std::int64_t s, float* out) {
    for (int ni = 0; ni < n; ++ni)
        for (int ci = 0; ci < c; ++ci)
            std::copy_n(y + (std::int64_t(ni) * c + ci) * s, s,
                        out + (std::int64_t(ci) * n + ni) * s);
}
inline void unfold_batch(const float* m, int n, int c, std::int64_t s, float* out) {
    for (int ci = 0; ci < c; ++ci)
        for (int ni = 0; ni < n; ++ni)
            std::copy_n(m + (std::int64_t(ci) * n + ni) * s, s,
                        out + (std::int64_t(ni) * c + ci) * s);
}

}  // namespace detail

inline Var conv2d(Graph& g, Var x, Var w, Var b, int stride, int pad) {
    const Tensor& xv = g.val(x);
    const Tensor& wv = g.val(w);
    if (xv.ndim() != 4 || wv.ndim() != 4) throw std::invalid_argument("conv2d: want 4-d tensors");
    const int n = xv.dim(0), cin = xv.dim(1), h = xv.dim(2), wd = xv.dim(3);
    const int cout = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
    if (wv.dim(1) != cin) throw std::invalid_argument("conv2d: channel mismatch");
    const int ho = (h + 2 * pad - kh) / stride + 1;
    const int wo = (wd + 2 * pad - kw) / stride + 1;
    if (ho <= 0 || wo <= 0) throw std::invalid_argument("conv2d: empty output");

    const int k = cin * kh * kw;
    const std::int64_t ospatial = std::int64_t(ho) * wo;
    const std::int64_t ncols = n * ospatial;
    Tensor out({n, cout, ho, wo});
    {
        auto& col = detail::conv_scratch(0);
        auto& ybuf = detail::conv_scratch(1);
        col.resize(std::size_t(k) * ncols);
        ybuf.resize(std::size_t(cout) * ncols);
        detail::im2col_batched(xv.data.data(), n, cin, h, wd, kh, kw, stride, pad, ho, wo,
                               col.data());
        cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, cout, int(ncols), k, 1.0f,
                    wv.data.data(), k, col.data(), int(ncols), 0.0f, ybuf.data(), int(ncols));
        const Tensor& bv = g.val(b);
        for (int co = 0; co < cout; ++co) {
            const float bias = bv[co];
            float* row = ybuf.data() + std::int64_t(co) * ncols;
            for (std::int64_t i = 0; i < ncols; ++i) row[i] += bias;
        }
        detail::unfold_batch(ybuf.data(), n, cout, ospatial, out.data.data());
    }

    return g.make({x, w, b}, std::move(out), [x, w, b, stride, pad](Graph& g, int self) {
        const Tensor& go = g.grad_of(self);
        const Tensor& xv = g.val(x);
        const Tensor& wv = g.val(w);
        const int n = xv.dim(0), cin = xv.dim(1), h = xv.dim(2), wd = xv.dim(3);
        const int cout = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
        const int ho = go.dim(2), wo = go.dim(3);
        const int k = cin * kh * kw;
        const std::int64_t ospatial = std::int64_t(ho) * wo;
        const std::int64_t ncols = n * ospatial;
        const bool need_x = g.requires_grad(x);
        const bool need_w = g.requires_grad(w);
        const bool need_b = g.requires_grad(b);

        auto& col = detail::conv_scratch(0);
        auto& dybuf = detail::conv_scratch(1);
        dybuf.resize(std::size_t(cout) * ncols);
        detail::fold_batch(go.data.data(), n, cout, ospatial, dybuf.data());

        if (need_b) {
            Tensor& gb = g.grad(b);
            for (int co = 0; co < cout; ++co) {
                const float* row = dybuf.data() + std::int64_t(co) * ncols;
                double s = 0.0;
                for (std::int64_t i = 0; i < ncols; ++i) s += row[i];
                gb[co] += static_cast<float>(s);
            }
        }
        if (need_w) {
            col.resize(std::size_t(k) * ncols);
            detail::im2col_batched(xv.data.data(), n, cin, h, wd, kh, kw, stride, pad, ho, wo,
                                   col.data());
            cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, cout, k, int(ncols), 1.0f,
                        dybuf.data(), int(ncols), col.data(), int(ncols), 1.0f,
                        g.grad(w).data.data(), k);
        }
        if (need_x) {
            col.resize(std::size_t(k) * ncols);
            cblas_sgemm(CblasRowMajor, CblasTrans, CblasNoTrans, k, int(ncols), cout, 1.0f,
                        wv.data.data(), k, dybuf.data(), int(ncols), 0.0f, col.data(),
                        int(ncols));
            detail::col2im_batched_accum(col.data(), n, cin, h, wd, kh, kw, stride, pad, ho, wo,
                                         g.grad(x).data.data());
        }
    });
}

// ---------------------------------------------------------------------------
// Bilinear resize, half-pixel centers (align_corners = false).
// ---------------------------------------------------------------------------

namespace detail {
struct LerpAxis {
    std::vector<int> i0, i1;
    std::vector<float> w1;  // weight of i1; weight of i0 is 1-w1
};
inline LerpAxis lerp_axis(int in, int out) {
    LerpAxis ax;
    ax.i0.resize(out);
    ax.i1.resize(out);
    ax.w1.resize(out);
    const double scale = double(in) / double(out);
    for (int o = 0; o < out; ++o) {
        double s = (o + 0.5) * scale - 0.5;
        if (s < 0) s = 0;
        if (s > in - 1) s = in - 1;
        int lo = static_cast<int>(std::floor(s));
        if (lo > in - 2) lo = in - 2;
        if (lo < 0) lo = 0;
        ax.i0[o] = lo;
        ax.i1[o] = (in == 1) ? 0 : lo + 1;
        ax.w1[o] = (in == 1) ? 0.0f : static_cast<float>(s - lo);
    }
    return ax;
}
}  // namespace detail

inline Var bilinear_resize(Graph& g, Var x, int oh, int ow) {
    const Tensor& xv = g.val(x);
    if (xv.ndim() != 4) throw std::invalid_argument("bilinear_resize: want (N,C,H,W)");
    const int n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
    if (oh == h && ow == w) return x;
    auto ay = detail::lerp_axis(h, oh);
    auto ax = detail::lerp_axis(w, ow);
    Tensor out({n, c, oh, ow});
    for (int ni = 0; ni < n; ++ni) {
        for (int ci = 0; ci < c; ++ci) {
            const float* src = xv.data.data() + (std::int64_t(ni) * c + ci) * h * w;
            float* dst = out.data.data() + (std::int64_t(ni) * c + ci) * oh * ow;
            for (int oy = 0; oy < oh; ++oy) {
                const float* r0 = src + std::int64_t(ay.i0[oy]) * w;
                const float* r1 = src + std::int64_t(ay.i1[oy]) * w;
                const float wy = ay.w1[oy];
                for (int ox = 0; ox < ow; ++ox) {
                    const float wx = ax.w1[ox];
                    const float top = r0[ax.i0[ox]] * (1 - wx) + r0[ax.i1[ox]] * wx;
                    const float bot = r1[ax.i0[ox]] * (1 - wx) + r1[ax.i1[ox]] * wx;
                    *dst++ = top * (1 - wy) + bot * wy;
                }
            }
        }
    }
    return g.make({x}, std::move(out), [x, ay, ax, oh, ow](Graph& g, int self) {
        if (!g.requires_grad(x)) return;
        const Tensor& go = g.grad_of(self);
        Tensor& gx = g.grad(x);
        const int n = gx.dim(0), c = gx.dim(1), h = gx.dim(2), w = gx.dim(3);
        for (int ni = 0; ni < n; ++ni) {
            for (int ci = 0; ci < c; ++ci) {
                float* dst = gx.data.data() + (std::int64_t(ni) * c + ci) * h * w;
                const float* src = go.data.data() + (std::int64_t(ni) * c + ci) * oh * ow;
                for (int oy = 0; oy < oh; ++oy) {
                    const float wy = ay.w1[oy];
                    float* r0 = dst + std::int64_t(ay.i0[oy]) * w;
                    float* r1 = dst + std::int64_t(ay.i1[oy]) * w;
                    for (int ox = 0; ox < ow; ++ox) {
                        const float gv = *src++;
                        const float wx = ax.w1[ox];
                        r0[ax.i0[ox]] += gv * (1 - wy) * (1 - wx);
                        r0[ax.i1[ox]] += gv * (1 - wy) * wx;
                        r1[ax.i0[ox]] += gv * wy * (1 - wx);
                        r1[ax.i1[ox]] += gv * wy * wx;
                    }
                }
            }
        }
    });
}

// ---------------------------------------------------------------------------
// 3x3 Gaussian blur, depthwise, reflect-101 padding.
// ---------------------------------------------------------------------------

inline std::array<float, 9> gaussian3_kernel(double sigma) {
    std::array<float, 9> k{};
    double s = 0.0;
    const double denom = 2.0 * sigma * sigma;
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
            double v = std::exp(-(dy * dy + dx * dx) / denom);
            k[(dy + 1) * 3 + dx + 1] = static_cast<float>(v);
            s += v;
        }
    for (auto& v : k) v = static_cast<float>(v / s);
    return k;
}

namespace detail {
inline int reflect101(int i, int n) {
    if (i < 0) return -i;
    if (i >= n) return 2 * n - 2 - i;
    return i;
}
}  // namespace detail

inline Var gaussian_blur3(Graph& g, Var x, double sigma) {
    const Tensor& xv = g.val(x);
    if (xv.ndim() != 4) throw std::invalid_argument("gaussian_blur3: want (N,C,H,W)");
    if (xv.dim(2) < 2 || xv.dim(3) < 2)
        throw std::invalid_argument("gaussian_blur3: image too small for reflect padding");
    if (sigma <= 0.0) throw std::invalid_argument("gaussian_blur3: sigma must be positive");
    const auto k = gaussian3_kernel(sigma);
    const int n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
    Tensor out(xv.shape);
    for (std::int64_t p = 0; p < std::int64_t(n) * c; ++p) {
        const float* src = xv.data.data() + p * h * w;
        float* dst = out.data.data() + p * h * w;
        for (int y = 0; y < h; ++y) {
            for (int x2 = 0; x2 < w; ++x2) {
                float acc = 0.0f;
                for (int dy = -1; dy <= 1; ++dy) {
                    const int yy = detail::reflect101(y + dy, h);
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int xx = detail::reflect101(x2 + dx, w);
                        acc += k[(dy + 1) * 3 + dx + 1] * src[yy * w + xx];
                    }
                }
                dst[y * w + x2] = acc;
            }
        }
    }
    return g.make({x}, std::move(out), [x, k](Graph& g, int self) {
        if (!g.requires_grad(x)) return;
        const Tensor& go = g.grad_of(self);
        Tensor& gx = g.grad(x);
        const int n = gx.dim(0), c = gx.dim(1), h = gx.dim(2), w = gx.dim(3);
        for (std::int64_t p = 0; p < std::int64_t(n) * c; ++p) {
            const float* src = go.data.data() + p * h * w;
            float* dst = gx.data.data() + p * h * w;
            for (int y = 0; y < h; ++y) {
                for (int x2 = 0; x2 < w; ++x2) {
                    const float gv = src[y * w + x2];
                    for (int dy = -1; dy <= 1; ++dy) {
                        const int yy = detail::reflect101(y + dy, h);
                        for (int dx = -1; dx <= 1; ++dx) {
                            const int xx = detail::reflect101(x2 + dx, w);
                            dst[yy * w + xx] += k[(dy + 1) * 3 + dx + 1] * gv;
                        }
                    }
                }
            }
        }
    });
}

// Integer translation with replicate borders: out[y,x] = in[clamp(y-dy), clamp(x-dx)].
inline Var translate(Graph& g, Var x, int dx, int dy) {
    const Tensor& xv = g.val(x);
    if (xv.ndim() != 4) throw std::invalid_argument("translate: want (N,C,H,W)");
    if (dx == 0 && dy == 0) return x;
    const int n = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
    auto clampi = [](int v, int n) { return v < 0 ? 0 : (v >= n ? n - 1 : v); };
    Tensor out(xv.shape);
    for (std::int64_t p = 0; p < std::int64_t(n) * c; ++p) {
        const float* src = xv.data.data() + p * h * w;
        float* dst = out.data.data() + p * h * w;
        for (int y = 0; y < h; ++y) {
            const int sy = clampi(y - dy, h);
            for (int x2 = 0; x2 < w; ++x2) dst[y * w + x2] = src[sy * w + clampi(x2 - dx, w)];
        }
    }
    return g.make({x}, std::move(out), [x, dx, dy](Graph& g, int self) {
        if (!g.requires_grad(x)) return;
        const Tensor& go = g.grad_of(self);
        Tensor& gx = g.grad(x);
        const int n = gx.dim(0), c = gx.dim(1), h = gx.dim(2), w = gx.dim(3);
        auto clampi = [](int v, int n) { return v < 0 ? 0 : (v >= n ? n - 1 : v); };
        for (std::int64_t p = 0; p < std::int64_t(n) * c; ++p) {
            const float* src = go.data.data() + p * h * w;
            float* dst = gx.data.data() + p * h * w;
            for (int y = 0; y < h; ++y) {
                const int sy = clampi(y - dy, h);
                for (int x2 = 0; x2 < w; ++x2)
                    dst[sy * w + clampi(x2 - dx, w)] += src[y * w + x2];
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Parameter containers
// ---------------------------------------------------------------------------

struct Conv2dParams {
    Tensor w;  // (Cout,Cin,kh,kw)
    Tensor b;  // (Cout)
    int stride = 1;
    int pad = 1;

    static Conv2dParams make(Rng& rng, int cin, int cout, int k, int stride, int pad,
                             bool zero_init = false) {
        Conv2dParams p;
        p.stride = stride;
        p.pad = pad;
        if (zero_init) {
            p.w = Tensor({cout, cin, k, k});
        } else {
            const float scale = std::sqrt(2.0f / (cin * k * k));  // He init
            p.w = randn(rng, {cout, cin, k, k}, scale);
        }
        p.b = Tensor({cout});
        return p;
    }
};

struct BoundConv {
    Var w, b;
    int stride, pad;
};

inline BoundConv bind(Graph& g, const Conv2dParams& p, bool requires_grad) {
    return BoundConv{g.leaf(p.w, requires_grad), g.leaf(p.b, requires_grad), p.stride, p.pad};
}

inline Var apply(Graph& g, const BoundConv& c, Var x) {
    return conv2d(g, x, c.w, c.b, c.stride, c.pad);
}

}  // namespace faceseal
