#pragma once

// Independent reference implementations used to derive expected test values.
// Everything here is written as plain scalar loops in double precision and
// shares no code with the library paths it checks.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "faceseal/tensor.hpp"

namespace oracle {

using faceseal::Tensor;

// --- Haar: per-2x2-block multiplication by the orthonormal block matrix ----

struct HaarBandsD {
    std::vector<double> ll, lh, hl, hh;
    int c = 0, h = 0, w = 0;  // band dims
};

inline HaarBandsD haar_forward(const Tensor& img) {
    const int c = img.dim(0), h = img.dim(1) / 2, w = img.dim(2) / 2;
    HaarBandsD out;
    out.c = c;
    out.h = h;
    out.w = w;
    const size_t n = size_t(c) * h * w;
    out.ll.resize(n);
    out.lh.resize(n);
    out.hl.resize(n);
    out.hh.resize(n);
    for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double a = img.at3(ci, 2 * y, 2 * x);
                const double b = img.at3(ci, 2 * y, 2 * x + 1);
                const double cc = img.at3(ci, 2 * y + 1, 2 * x);
                const double d = img.at3(ci, 2 * y + 1, 2 * x + 1);
                const size_t o = (size_t(ci) * h + y) * w + x;
                out.ll[o] = 0.5 * (a + b + cc + d);
                out.lh[o] = 0.5 * (a + b - cc - d);
                out.hl[o] = 0.5 * (a - b + cc - d);
                out.hh[o] = 0.5 * (a - b - cc + d);
            }
    return out;
}

inline Tensor haar_inverse(const HaarBandsD& b) {
    Tensor img({b.c, b.h * 2, b.w * 2});
    for (int ci = 0; ci < b.c; ++ci)
        for (int y = 0; y < b.h; ++y)
            for (int x = 0; x < b.w; ++x) {
                const size_t o = (size_t(ci) * b.h + y) * b.w + x;
                const double ll = b.ll[o], lh = b.lh[o], hl = b.hl[o], hh = b.hh[o];
                img.at3(ci, 2 * y, 2 * x) = float(0.5 * (ll + lh + hl + hh));
                img.at3(ci, 2 * y, 2 * x + 1) = float(0.5 * (ll + lh - hl - hh));
                img.at3(ci, 2 * y + 1, 2 * x) = float(0.5 * (ll - lh + hl - hh));
                img.at3(ci, 2 * y + 1, 2 * x + 1) = float(0.5 * (ll - lh - hl + hh));
            }
    return img;
}

// --- JPEG: scalar-loop DCT / quantize / IDCT on one image ------------------

inline double jpeg_quality_scale(double qf) {
    return qf < 50.0 ? 5000.0 / qf : 200.0 - 2.0 * qf;
}

inline std::array<double, 64> jpeg_scaled_table(const int* base, double qf) {
    std::array<double, 64> q{};
    const double s = jpeg_quality_scale(qf);
    for (int i = 0; i < 64; ++i) {
        double v = std::floor((base[i] * s + 50.0) / 100.0);
        q[i] = std::min(255.0, std::max(1.0, v));
    }
    return q;
}

// 3-channel (3,H,W) [0,1] image, H and W multiples of 8.
inline Tensor jpeg_roundtrip(const Tensor& img, double qf) {
    static const int kLuma[64] = {16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,
                                  58, 60, 55, 14, 13,  16,  24,  40,  57, 69, 56, 14, 17,
                                  22, 29, 51, 87, 80,  62,  18,  22,  37, 56, 68, 109, 103,
                                  77, 24, 35, 55, 64,  81,  104, 113, 92, 49, 64, 78, 87,
                                  103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};
    static const int kChroma[64] = {17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99,
                                    99, 24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99,
                                    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
                                    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
                                    99, 99, 99, 99};
    const int h = img.dim(1), w = img.dim(2);
    std::vector<double> y(size_t(h) * w), cb(size_t(h) * w), cr(size_t(h) * w);
    for (int i = 0; i < h * w; ++i) {
        const double R = img.data[i] * 255.0;
        const double G = img.data[size_t(h) * w + i] * 255.0;
        const double B = img.data[2 * size_t(h) * w + i] * 255.0;
        y[i] = 0.299 * R + 0.587 * G + 0.114 * B;
        cb[i] = -0.168736 * R - 0.331264 * G + 0.5 * B + 128.0;
        cr[i] = 0.5 * R - 0.418688 * G - 0.081312 * B + 128.0;
    }
    auto process = [&](std::vector<double>& plane, const std::array<double, 64>& q) {
        for (int by = 0; by < h; by += 8)
            for (int bx = 0; bx < w; bx += 8) {
                double blk[64], coef[64];
                for (int i = 0; i < 8; ++i)
                    for (int j = 0; j < 8; ++j)
                        blk[i * 8 + j] = plane[size_t(by + i) * w + bx + j] - 128.0;
                // DCT-II straight from the definition
                for (int u = 0; u < 8; ++u)
                    for (int v = 0; v < 8; ++v) {
                        double acc = 0.0;
                        for (int i = 0; i < 8; ++i)
                            for (int j = 0; j < 8; ++j)
                                acc += blk[i * 8 + j] *
                                       std::cos((2 * i + 1) * u * M_PI / 16.0) *
                                       std::cos((2 * j + 1) * v * M_PI / 16.0);
                        const double au = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
                        const double av = v == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
                        coef[u * 8 + v] = au * av * acc;
                    }
                for (int i = 0; i < 64; ++i)
                    coef[i] = std::nearbyint(coef[i] / q[i]) * q[i];
                for (int i = 0; i < 8; ++i)
                    for (int j = 0; j < 8; ++j) {
                        double acc = 0.0;
                        for (int u = 0; u < 8; ++u)
                            for (int v = 0; v < 8; ++v) {
                                const double au =
                                    u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
                                const double av =
                                    v == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
                                acc += au * av * coef[u * 8 + v] *
                                       std::cos((2 * i + 1) * u * M_PI / 16.0) *
                                       std::cos((2 * j + 1) * v * M_PI / 16.0);
                            }
                        plane[size_t(by + i) * w + bx + j] = acc + 128.0;
                    }
            }
    };
    process(y, jpeg_scaled_table(kLuma, qf));
    process(cb, jpeg_scaled_table(kChroma, qf));
    process(cr, jpeg_scaled_table(kChroma, qf));
    Tensor out(img.shape);
    for (int i = 0; i < h * w; ++i) {
        const double Y = y[i], Cb = cb[i] - 128.0, Cr = cr[i] - 128.0;
        double R = (Y + 1.402 * Cr) / 255.0;
        double G = (Y - 0.344136 * Cb - 0.714136 * Cr) / 255.0;
        double B = (Y + 1.772 * Cb) / 255.0;
        out.data[i] = float(std::min(1.0, std::max(0.0, R)));
        out.data[size_t(h) * w + i] = float(std::min(1.0, std::max(0.0, G)));
        out.data[2 * size_t(h) * w + i] = float(std::min(1.0, std::max(0.0, B)));
    }
    return out;
}

// --- two-pass scalar bilinear rescale (half-pixel centers) ------------------

inline double bilerp_sample(const std::vector<double>& plane, int h, int w, double sy,
                            double sx) {
    sy = std::min(double(h - 1), std::max(0.0, sy));
    sx = std::min(double(w - 1), std::max(0.0, sx));
    int y0 = std::min(int(std::floor(sy)), h - 2);
    int x0 = std::min(int(std::floor(sx)), w - 2);
    if (h == 1) y0 = 0;
    if (w == 1) x0 = 0;
    const double fy = h == 1 ? 0.0 : sy - y0;
    const double fx = w == 1 ? 0.0 : sx - x0;
    const int y1 = h == 1 ? 0 : y0 + 1, x1 = w == 1 ? 0 : x0 + 1;
    return plane[size_t(y0) * w + x0] * (1 - fy) * (1 - fx) +
           plane[size_t(y0) * w + x1] * (1 - fy) * fx +
           plane[size_t(y1) * w + x0] * fy * (1 - fx) + plane[size_t(y1) * w + x1] * fy * fx;
}

inline Tensor rescale_two_pass(const Tensor& img, double factor) {
    const int c = img.dim(0), h = img.dim(1), w = img.dim(2);
    const int dh = std::max(1, int(std::floor(factor * h)));
    const int dw = std::max(1, int(std::floor(factor * w)));
    Tensor out(img.shape);
    for (int ci = 0; ci < c; ++ci) {
        std::vector<double> plane(size_t(h) * w), down(size_t(dh) * dw);
        for (int i = 0; i < h * w; ++i) plane[i] = img.data[size_t(ci) * h * w + i];
        for (int y = 0; y < dh; ++y)
            for (int x = 0; x < dw; ++x)
                down[size_t(y) * dw + x] = bilerp_sample(
                    plane, h, w, (y + 0.5) * double(h) / dh - 0.5, (x + 0.5) * double(w) / dw - 0.5);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                out.data[(size_t(ci) * h + y) * w + x] = float(bilerp_sample(
                    down, dh, dw, (y + 0.5) * double(dh) / h - 0.5, (x + 0.5) * double(dw) / w - 0.5));
    }
    return out;
}

// --- misc scalar oracles ----------------------------------------------------

inline double bce_mean(const std::vector<double>& probs, const std::vector<double>& labels) {
    double s = 0.0;
    for (size_t i = 0; i < probs.size(); ++i)
        s += -(labels[i] * std::log(probs[i]) + (1.0 - labels[i]) * std::log(1.0 - probs[i]));
    return s / double(probs.size());
}

// AUC by exhaustive pair counting, ties = 1/2.
inline double auc_pairs(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    std::int64_t pairs = 0;
    for (size_t i = 0; i < scores.size(); ++i)
        for (size_t j = 0; j < scores.size(); ++j) {
            if (labels[i] == 1 && labels[j] == 0) {
                ++pairs;
                if (scores[i] > scores[j]) wins += 1.0;
                else if (scores[i] == scores[j]) wins += 0.5;
            }
        }
    return pairs ? wins / double(pairs) : 0.5;
}

// Root-sum-square of elementwise difference, mean over batch items.
inline double mean_rss(const std::vector<std::vector<double>>& diffs) {
    double acc = 0.0;
    for (const auto& d : diffs) {
        double s = 0.0;
        for (double v : d) s += v * v;
        acc += std::sqrt(s);
    }
    return diffs.empty() ? 0.0 : acc / double(diffs.size());
}

}  // namespace oracle
