#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "faceseal/nn.hpp"
#include "faceseal/random.hpp"

namespace faceseal {

// Simulated public transmission channel: differentiable benign manipulations
// applied at random strengths in training, fixed strengths in evaluation.

enum class ChannelKind { identity, jpeg, blur, noise, rescale };

inline const char* to_string(ChannelKind k) {
    switch (k) {
        case ChannelKind::identity: return "identity";
        case ChannelKind::jpeg: return "jpeg";
        case ChannelKind::blur: return "blur";
        case ChannelKind::noise: return "noise";
        case ChannelKind::rescale: return "rescale";
    }
    return "?";
}

inline ChannelKind channel_kind_from(const std::string& s) {
    if (s == "identity") return ChannelKind::identity;
    if (s == "jpeg") return ChannelKind::jpeg;
    if (s == "blur") return ChannelKind::blur;
    if (s == "noise") return ChannelKind::noise;
    if (s == "rescale") return ChannelKind::rescale;
    throw std::invalid_argument("unknown channel kind: " + s);
}

struct ChannelOp {
    ChannelKind kind = ChannelKind::identity;
    double strength = 0.0;
    std::uint64_t seed = 0;
};

struct ChannelRanges {
    bool identity = true, jpeg = true, blur = true, noise = true, rescale = true;
    double jpeg_min = 50.0, jpeg_max = 95.0;
    double blur_min = 1.0, blur_max = 2.0;
    double noise_min = 0.0, noise_max = 0.05;
    double rescale_min = 0.5, rescale_max = 1.0;
};

// ---------------------------------------------------------------------------
// Differentiable JPEG (4:4:4, Annex-K tables, IJG quality scaling).
//
// Rounding uses a straight-through estimator. Because the DCT is orthonormal
// and quantize/dequantize are exact scalar inverses outside the rounding, the
// STE backward of the whole block transform collapses to a pass-through
// gradient masked by the final [0,1] clamp.
// ---------------------------------------------------------------------------

namespace jpegdetail {

inline const std::array<int, 64>& luma_table() {
    static const std::array<int, 64> t = {
        16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
        14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
        18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
        49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};
    return t;
}

inline const std::array<int, 64>& chroma_table() {
    static const std::array<int, 64> t = {
        17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
        24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
        99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
        99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};
    return t;
}

inline std::array<float, 64> scaled_table(const std::array<int, 64>& base, double qf) {
    const double s = qf < 50.0 ? 5000.0 / qf : 200.0 - 2.0 * qf;
    std::array<float, 64> out{};
    for (int i = 0; i < 64; ++i) {
        double q = std::floor((base[i] * s + 50.0) / 100.0);
        out[i] = static_cast<float>(std::min(255.0, std::max(1.0, q)));
    }
    return out;
}

inline const std::array<float, 64>& dct8_matrix() {
    static const std::array<float, 64> d = [] {
        std::array<float, 64> m{};
        for (int k = 0; k < 8; ++k) {
            const double a = k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
            for (int n = 0; n < 8; ++n)
                m[k * 8 + n] = static_cast<float>(a * std::cos((2 * n + 1) * k * M_PI / 16.0));
        }
        return m;
    }();
    return d;
}

// In-place quantized DCT round trip of one 8x8 block (values centered at 0).
inline void block_roundtrip(float* blk, const std::array<float, 64>& q) {
    const auto& d = dct8_matrix();
    float tmp[64], coef[64];
    // coef = D * blk * D^T
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
            float acc = 0.0f;
            for (int k = 0; k < 8; ++k) acc += d[i * 8 + k] * blk[k * 8 + j];
            tmp[i * 8 + j] = acc;
        }
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
            float acc = 0.0f;
            for (int k = 0; k < 8; ++k) acc += tmp[i * 8 + k] * d[j * 8 + k];
            coef[i * 8 + j] = acc;
        }
    for (int i = 0; i < 64; ++i) coef[i] = std::nearbyint(coef[i] / q[i]) * q[i];
    // blk = D^T * coef * D
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
            float acc = 0.0f;
            for (int k = 0; k < 8; ++k) acc += d[k * 8 + i] * coef[k * 8 + j];
            tmp[i * 8 + j] = acc;
        }
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
            float acc = 0.0f;
            for (int k = 0; k < 8; ++k) acc += tmp[i * 8 + k] * d[k * 8 + j];
            blk[i * 8 + j] = acc;
        }
}

// Compress one (3,H,W) image in 0..255 YCbCr planes. planes[0] is Y.
inline void roundtrip_planes(std::vector<float>& y, std::vector<float>& cb,
                             std::vector<float>& cr, int h, int w, double qf) {
    const auto ql = scaled_table(luma_table(), qf);
    const auto qc = scaled_table(chroma_table(), qf);
    const int hp = (h + 7) / 8 * 8, wp = (w + 7) / 8 * 8;
    auto process = [&](std::vector<float>& plane, const std::array<float, 64>& q) {
        std::vector<float> padded(std::size_t(hp) * wp);
        for (int yy = 0; yy < hp; ++yy) {
            const int sy = std::min(yy, h - 1);
            for (int xx = 0; xx < wp; ++xx)
                padded[std::size_t(yy) * wp + xx] = plane[std::size_t(sy) * w + std::min(xx, w - 1)];
        }
        float blk[64];
        for (int by = 0; by < hp; by += 8)
            for (int bx = 0; bx < wp; bx += 8) {
                for (int i = 0; i < 8; ++i)
                    for (int j = 0; j < 8; ++j)
                        blk[i * 8 + j] = padded[std::size_t(by + i) * wp + bx + j] - 128.0f;
                block_roundtrip(blk, q);
                for (int i = 0; i < 8; ++i)
                    for (int j = 0; j < 8; ++j)
                        padded[std::size_t(by + i) * wp + bx + j] = blk[i * 8 + j] + 128.0f;
            }
        for (int yy = 0; yy < h; ++yy)
            for (int xx = 0; xx < w; ++xx)
                plane[std::size_t(yy) * w + xx] = padded[std::size_t(yy) * wp + xx];
    };
    process(y, ql);
    process(cb, qc);
    process(cr, qc);
}

// Plain tensor forward: (N,3,H,W) in [0,1] -> same, clamped.
inline Tensor forward(const Tensor& x, double qf, std::vector<std::uint8_t>* clip_mask) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (c != 3) throw std::invalid_argument("jpeg: want 3-channel input");
    Tensor out(x.shape);
    if (clip_mask) clip_mask->assign(std::size_t(x.numel()), 0);
    const std::int64_t plane = std::int64_t(h) * w;
    std::vector<float> y(plane), cb(plane), cr(plane);
    for (int ni = 0; ni < n; ++ni) {
        const float* r = x.data.data() + std::int64_t(ni) * 3 * plane;
        const float* gg = r + plane;
        const float* b = gg + plane;
        for (std::int64_t i = 0; i < plane; ++i) {
            const float R = r[i] * 255.0f, G = gg[i] * 255.0f, B = b[i] * 255.0f;
            y[i] = 0.299f * R + 0.587f * G + 0.114f * B;
            cb[i] = -0.168736f * R - 0.331264f * G + 0.5f * B + 128.0f;
            cr[i] = 0.5f * R - 0.418688f * G - 0.081312f * B + 128.0f;
        }
        roundtrip_planes(y, cb, cr, h, w, qf);
        float* ro = out.data.data() + std::int64_t(ni) * 3 * plane;
        float* go = ro + plane;
        float* bo = go + plane;
        for (std::int64_t i = 0; i < plane; ++i) {
            const float Y = y[i], Cb = cb[i] - 128.0f, Cr = cr[i] - 128.0f;
            float R = (Y + 1.402f * Cr) / 255.0f;
            float G = (Y - 0.344136f * Cb - 0.714136f * Cr) / 255.0f;
            float B = (Y + 1.772f * Cb) / 255.0f;
            const std::int64_t base = std::int64_t(ni) * 3 * plane + i;
            if (clip_mask) {
                (*clip_mask)[base] = R > 0.0f && R < 1.0f;
                (*clip_mask)[base + plane] = G > 0.0f && G < 1.0f;
                (*clip_mask)[base + 2 * plane] = B > 0.0f && B < 1.0f;
            }
            ro[i] = std::min(1.0f, std::max(0.0f, R));
            go[i] = std::min(1.0f, std::max(0.0f, G));
            bo[i] = std::min(1.0f, std::max(0.0f, B));
        }
    }
    return out;
}

}  // namespace jpegdetail

inline Var jpeg_differentiable(Graph& g, Var x, double qf) {
    if (qf < 1.0 || qf > 100.0) throw std::out_of_range("jpeg: quality factor outside [1,100]");
    std::vector<std::uint8_t> mask;
    Tensor out = jpegdetail::forward(g.val(x), qf, &mask);
    return g.make({x}, std::move(out), [x, mask = std::move(mask)](Graph& g, int self) {
        if (!g.requires_grad(x)) return;
        const Tensor& go = g.grad_of(self);
        Tensor& gx = g.grad(x);
        for (std::int64_t i = 0; i < gx.numel(); ++i)
            if (mask[std::size_t(i)]) gx[i] += go[i];  // straight-through
    });
}

inline Var gaussian_blur_channel(Graph& g, Var x, double sigma) {
    return gaussian_blur3(g, x, sigma);
}

inline Var gaussian_noise(Graph& g, Var x, double sigma, std::uint64_t seed) {
    if (sigma < 0.0) throw std::out_of_range("noise: negative sigma");
    if (sigma == 0.0) return x;
    Rng rng(seed);
    Var noise = g.constant(randn(rng, g.val(x).shape, static_cast<float>(sigma)));
    return clamp(g, add(g, x, noise), 0.0f, 1.0f);
}

inline Var rescale(Graph& g, Var x, double factor) {
    if (factor <= 0.0 || factor > 1.0) throw std::out_of_range("rescale: factor outside (0,1]");
    const int h = g.val(x).dim(2), w = g.val(x).dim(3);
    const int dh = std::max(1, static_cast<int>(std::floor(factor * h)));
    const int dw = std::max(1, static_cast<int>(std::floor(factor * w)));
    if (dh == h && dw == w) return x;
    return bilinear_resize(g, bilinear_resize(g, x, dh, dw), h, w);
}

inline ChannelOp sample_benign(Rng& rng, const ChannelRanges& r = {}) {
    std::vector<ChannelKind> kinds;
    if (r.identity) kinds.push_back(ChannelKind::identity);
    if (r.jpeg) kinds.push_back(ChannelKind::jpeg);
    if (r.blur) kinds.push_back(ChannelKind::blur);
    if (r.noise) kinds.push_back(ChannelKind::noise);
    if (r.rescale) kinds.push_back(ChannelKind::rescale);
    if (kinds.empty()) return ChannelOp{ChannelKind::identity, 0.0, 0};
    ChannelOp op;
    op.kind = kinds[rng.below(kinds.size())];
    switch (op.kind) {
        case ChannelKind::identity: op.strength = 0.0; break;
        case ChannelKind::jpeg: op.strength = rng.uniform(r.jpeg_min, r.jpeg_max); break;
        case ChannelKind::blur: op.strength = rng.uniform(r.blur_min, r.blur_max); break;
        case ChannelKind::noise: op.strength = rng.uniform(r.noise_min, r.noise_max); break;
        case ChannelKind::rescale: op.strength = rng.uniform(r.rescale_min, r.rescale_max); break;
    }
    op.seed = rng.next_u64();
    return op;
}

inline Var apply(Graph& g, Var x, const ChannelOp& op) {
    switch (op.kind) {
        case ChannelKind::identity: return x;
        case ChannelKind::jpeg: return jpeg_differentiable(g, x, op.strength);
        case ChannelKind::blur: return gaussian_blur_channel(g, x, op.strength);
        case ChannelKind::noise: return gaussian_noise(g, x, op.strength, op.seed);
        case ChannelKind::rescale: return rescale(g, x, op.strength);
    }
    throw std::logic_error("apply: bad channel kind");
}

// Tensor-level convenience for eval paths.
inline Tensor apply_tensor(const Tensor& x, const ChannelOp& op) {
    Graph g;
    const bool chw = x.ndim() == 3;
    Tensor x4 = chw ? Tensor({1, x.dim(0), x.dim(1), x.dim(2)}, x.data) : x;
    Var out = apply(g, g.constant(std::move(x4)), op);
    Tensor t = g.val(out);
    if (chw) t = Tensor({t.dim(1), t.dim(2), t.dim(3)}, std::move(t.data));
    return t;
}

}  // namespace faceseal
