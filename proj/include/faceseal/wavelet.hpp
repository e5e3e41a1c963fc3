#pragma once

#include <stdexcept>

#include "faceseal/autograd.hpp"
#include "faceseal/tensor.hpp"

namespace faceseal {

// Single-level orthonormal Haar transform. Analysis of a 2x2 block
// [a b; c d] (a=top-left, row-major):
//   ll = (a+b+c+d)/2   lh = (a+b-c-d)/2   (vertical detail)
//   hl = (a-b+c-d)/2   hh = (a-b-c+d)/2
// The 4x4 block matrix is orthogonal, so synthesis is its transpose and
// energy is preserved exactly. Sub-bands stack band-major on the channel
// axis: C image channels become [LL(C) | LH(C) | HL(C) | HH(C)].

struct WaveletBands {
    Tensor ll, lh, hl, hh;  // each (C, H/2, W/2)
};

namespace detail {

// (N,C,H,W) -> (N,4C,H/2,W/2)
inline Tensor dwt_stack_tensor(const Tensor& x) {
    if (x.ndim() != 4) throw std::invalid_argument("dwt: want (N,C,H,W)");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h % 2 || w % 2) throw std::invalid_argument("dwt: odd image dimensions");
    const int hh = h / 2, hw = w / 2;
    Tensor out({n, 4 * c, hh, hw});
    const std::int64_t oplane = std::int64_t(hh) * hw;
    for (int ni = 0; ni < n; ++ni) {
        for (int ci = 0; ci < c; ++ci) {
            const float* src = x.data.data() + (std::int64_t(ni) * c + ci) * h * w;
            float* ll = out.data.data() + (std::int64_t(ni) * 4 * c + ci) * oplane;
            float* lh = ll + std::int64_t(c) * oplane;
            float* hl = lh + std::int64_t(c) * oplane;
            float* hd = hl + std::int64_t(c) * oplane;
            for (int y = 0; y < hh; ++y) {
                const float* r0 = src + std::int64_t(2 * y) * w;
                const float* r1 = r0 + w;
                for (int xx = 0; xx < hw; ++xx) {
                    const float a = r0[2 * xx], b = r0[2 * xx + 1];
                    const float cc = r1[2 * xx], d = r1[2 * xx + 1];
                    const std::int64_t o = std::int64_t(y) * hw + xx;
                    ll[o] = 0.5f * (a + b + cc + d);
                    lh[o] = 0.5f * (a + b - cc - d);
                    hl[o] = 0.5f * (a - b + cc - d);
                    hd[o] = 0.5f * (a - b - cc + d);
                }
            }
        }
    }
    return out;
}

// (N,4C,H/2,W/2) -> (N,C,H,W)
inline Tensor iwt_stack_tensor(const Tensor& s) {
    if (s.ndim() != 4 || s.dim(1) % 4)
        throw std::invalid_argument("iwt: want (N,4C,h,w)");
    const int n = s.dim(0), c = s.dim(1) / 4, hh = s.dim(2), hw = s.dim(3);
    const int h = hh * 2, w = hw * 2;
    Tensor out({n, c, h, w});
    const std::int64_t iplane = std::int64_t(hh) * hw;
    for (int ni = 0; ni < n; ++ni) {
        for (int ci = 0; ci < c; ++ci) {
            float* dst = out.data.data() + (std::int64_t(ni) * c + ci) * h * w;
            const float* ll = s.data.data() + (std::int64_t(ni) * 4 * c + ci) * iplane;
            const float* lh = ll + std::int64_t(c) * iplane;
            const float* hl = lh + std::int64_t(c) * iplane;
            const float* hd = hl + std::int64_t(c) * iplane;
            for (int y = 0; y < hh; ++y) {
                float* r0 = dst + std::int64_t(2 * y) * w;
                float* r1 = r0 + w;
                for (int xx = 0; xx < hw; ++xx) {
                    const std::int64_t o = std::int64_t(y) * hw + xx;
                    const float vll = ll[o], vlh = lh[o], vhl = hl[o], vhh = hd[o];
                    r0[2 * xx] = 0.5f * (vll + vlh + vhl + vhh);
                    r0[2 * xx + 1] = 0.5f * (vll + vlh - vhl - vhh);
                    r1[2 * xx] = 0.5f * (vll - vlh + vhl - vhh);
                    r1[2 * xx + 1] = 0.5f * (vll - vlh - vhl + vhh);
                }
            }
        }
    }
    return out;
}

}  // namespace detail

// Plain (C,H,W) analysis/synthesis, the spec-facing surface.
inline WaveletBands dwt_haar(const Tensor& img) {
    if (img.ndim() != 3) throw std::invalid_argument("dwt_haar: want (C,H,W)");
    Tensor x({1, img.dim(0), img.dim(1), img.dim(2)}, img.data);
    Tensor s = detail::dwt_stack_tensor(x);
    const int c = img.dim(0), hh = img.dim(1) / 2, hw = img.dim(2) / 2;
    const std::int64_t plane = std::int64_t(c) * hh * hw;
    WaveletBands b;
    auto cut = [&](int band) {
        Tensor t({c, hh, hw});
        std::copy_n(s.data.data() + band * plane, plane, t.data.data());
        return t;
    };
    b.ll = cut(0);
    b.lh = cut(1);
    b.hl = cut(2);
    b.hh = cut(3);
    return b;
}

inline Tensor iwt_haar(const WaveletBands& b) {
    if (!(b.ll.same_shape(b.lh) && b.ll.same_shape(b.hl) && b.ll.same_shape(b.hh)))
        throw std::invalid_argument("iwt_haar: band shapes differ");
    if (b.ll.ndim() != 3) throw std::invalid_argument("iwt_haar: want (C,h,w) bands");
    const int c = b.ll.dim(0), hh = b.ll.dim(1), hw = b.ll.dim(2);
    Tensor s({1, 4 * c, hh, hw});
    const std::int64_t plane = std::int64_t(c) * hh * hw;
    std::copy(b.ll.data.begin(), b.ll.data.end(), s.data.begin());
    std::copy(b.lh.data.begin(), b.lh.data.end(), s.data.begin() + plane);
    std::copy(b.hl.data.begin(), b.hl.data.end(), s.data.begin() + 2 * plane);
    std::copy(b.hh.data.begin(), b.hh.data.end(), s.data.begin() + 3 * plane);
    Tensor out = detail::iwt_stack_tensor(s);
    return Tensor({c, hh * 2, hw * 2}, std::move(out.data));
}

// Graph ops. The transform is orthonormal, so the adjoint needed by the
// backward pass is exactly the inverse transform applied to the gradient.
inline Var dwt_stack(Graph& g, Var x) {
    Tensor out = detail::dwt_stack_tensor(g.val(x));
    return g.make({x}, std::move(out), [x](Graph& g, int self) {
        if (!g.requires_grad(x)) return;
        Tensor gi = detail::iwt_stack_tensor(g.grad_of(self));
        detail::axpy(g.grad(x), gi);
    });
}

inline Var iwt_stack(Graph& g, Var s) {
    Tensor out = detail::iwt_stack_tensor(g.val(s));
    return g.make({s}, std::move(out), [s](Graph& g, int self) {
        if (!g.requires_grad(s)) return;
        Tensor gi = detail::dwt_stack_tensor(g.grad_of(self));
        detail::axpy(g.grad(s), gi);
    });
}

// LL sub-band of a (N,C,H,W) image batch: first C channels of the stack.
inline Var dwt_ll(Graph& g, Var x) {
    const int c = g.val(x).dim(1);
    return slice_ch(g, dwt_stack(g, x), 0, c);
}

}  // namespace faceseal
