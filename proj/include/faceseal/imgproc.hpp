#pragma once

// Plain (non-differentiable) image helpers shared by mask generation, the
// synthetic corpus generator and the quality metrics.

#include <cmath>
#include <vector>

#include "faceseal/tensor.hpp"

namespace faceseal {

inline std::vector<float> gaussian_kernel_1d(double sigma, int radius = 0) {
    if (radius <= 0) radius = std::max(1, int(std::ceil(3.0 * sigma)));
    std::vector<float> k(2 * radius + 1);
    double s = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        k[i + radius] = float(v);
        s += v;
    }
    for (auto& v : k) v = float(v / s);
    return k;
}

namespace detail {
inline int reflect101p(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}
}  // namespace detail

// Separable Gaussian blur of each plane of a (C,H,W) tensor, reflect-101.
inline Tensor gaussian_blur_plain(const Tensor& img, double sigma, int radius = 0) {
    if (sigma <= 0.0) return img;
    const auto k = gaussian_kernel_1d(sigma, radius);
    const int r = (int(k.size()) - 1) / 2;
    const int c = img.ndim() == 3 ? img.dim(0) : 1;
    const int h = img.ndim() == 3 ? img.dim(1) : img.dim(0);
    const int w = img.ndim() == 3 ? img.dim(2) : img.dim(1);
    Tensor tmp(img.shape), out(img.shape);
    for (int ci = 0; ci < c; ++ci) {
        const float* src = img.data.data() + std::size_t(ci) * h * w;
        float* mid = tmp.data.data() + std::size_t(ci) * h * w;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i)
                    acc += k[i + r] * src[y * w + detail::reflect101p(x + i, w)];
                mid[y * w + x] = float(acc);
            }
        float* dst = out.data.data() + std::size_t(ci) * h * w;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i)
                    acc += k[i + r] * mid[detail::reflect101p(y + i, h) * w + x];
                dst[y * w + x] = float(acc);
            }
    }
    return out;
}

// Plain bilinear resize of a single (H,W) plane, half-pixel centers.
inline Tensor resize_plane(const Tensor& plane, int oh, int ow) {
    const int h = plane.dim(0), w = plane.dim(1);
    Tensor out({oh, ow});
    for (int oy = 0; oy < oh; ++oy) {
        double sy = (oy + 0.5) * double(h) / oh - 0.5;
        sy = std::min(double(h - 1), std::max(0.0, sy));
        int y0 = std::min(int(sy), h - 2);
        if (h == 1) y0 = 0;
        const double fy = h == 1 ? 0.0 : sy - y0;
        for (int ox = 0; ox < ow; ++ox) {
            double sx = (ox + 0.5) * double(w) / ow - 0.5;
            sx = std::min(double(w - 1), std::max(0.0, sx));
            int x0 = std::min(int(sx), w - 2);
            if (w == 1) x0 = 0;
            const double fx = w == 1 ? 0.0 : sx - x0;
            const int y1 = h == 1 ? 0 : y0 + 1, x1 = w == 1 ? 0 : x0 + 1;
            out.data[std::size_t(oy) * ow + ox] =
                float(plane.data[std::size_t(y0) * w + x0] * (1 - fy) * (1 - fx) +
                      plane.data[std::size_t(y0) * w + x1] * (1 - fy) * fx +
                      plane.data[std::size_t(y1) * w + x0] * fy * (1 - fx) +
                      plane.data[std::size_t(y1) * w + x1] * fy * fx);
        }
    }
    return out;
}

}  // namespace faceseal
