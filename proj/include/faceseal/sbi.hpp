#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "faceseal/channel.hpp"
#include "faceseal/imgproc.hpp"
#include "faceseal/nn.hpp"

namespace faceseal {

// Malicious-manipulation synthesizer: self-blended forgeries built from the
// steganographic image itself, so the detector never needs a real deepfake
// model during training.

struct SbiConfig {
    bool color_jitter = true;   // brightness/contrast/hue, each <= 10%
    bool sharpen = true;
    bool translate = true;
    bool resample = true;       // downsample-upsample
    double jitter_mag = 0.1;
    double sharpen_max = 0.3;
    int translate_max = 4;      // pixels
    double resample_min = 0.5;
    double mask_area_min = 0.05;
    double mask_area_max = 0.5;
    double feather_sigma = 2.0;
};

struct BlendMask {
    Tensor mask;              // (H,W) in [0,1]
    double support_fraction = 0.0;  // area share of {mask > 0.5}
    int bbox_x0 = 0, bbox_y0 = 0, bbox_x1 = 0, bbox_y1 = 0;
};

using Landmarks = std::vector<std::pair<float, float>>;  // (x,y) pixel coords

// --- pseudo-source ----------------------------------------------------------

namespace sbidetail {

// Rotation of RGB about the gray axis by angle theta (differentiable hue-ish
// jitter; exact HSV hue rotation is not smooth).
inline std::array<float, 9> hue_matrix(double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    const double a = 1.0 / 3.0, b = 1.0 / std::sqrt(3.0);
    std::array<float, 9> m{};
    const double k[9] = {0, -b, b, b, 0, -b, -b, b, 0};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double v = (i == j ? c : 0.0) + (1.0 - c) * a + s * k[i * 3 + j];
            m[i * 3 + j] = float(v);
        }
    return m;
}

inline Var color_matrix(Graph& g, Var x, const std::array<float, 9>& m) {
    const Tensor& xv = g.val(x);
    if (xv.dim(1) != 3) throw std::invalid_argument("color_matrix: want 3 channels");
    const int n = xv.dim(0), h = xv.dim(2), w = xv.dim(3);
    const std::int64_t plane = std::int64_t(h) * w;
    Tensor out(xv.shape);
    for (int ni = 0; ni < n; ++ni) {
        const float* r = xv.data.data() + std::int64_t(ni) * 3 * plane;
        float* o = out.data.data() + std::int64_t(ni) * 3 * plane;
        for (std::int64_t i = 0; i < plane; ++i) {
            const float R = r[i], G = r[i + plane], B = r[i + 2 * plane];
            o[i] = m[0] * R + m[1] * G + m[2] * B;
            o[i + plane] = m[3] * R + m[4] * G + m[5] * B;
            o[i + 2 * plane] = m[6] * R + m[7] * G + m[8] * B;
        }
    }
    return g.make({x}, std::move(out), [x, m](Graph& g, int self) {
        if (!g.requires_grad(x)) return;
        const Tensor& go = g.grad_of(self);
        Tensor& gx = g.grad(x);
        const int n = gx.dim(0), h = gx.dim(2), w = gx.dim(3);
        const std::int64_t plane = std::int64_t(h) * w;
        for (int ni = 0; ni < n; ++ni) {
            const float* o = go.data.data() + std::int64_t(ni) * 3 * plane;
            float* r = gx.data.data() + std::int64_t(ni) * 3 * plane;
            for (std::int64_t i = 0; i < plane; ++i) {
                const float gR = o[i], gG = o[i + plane], gB = o[i + 2 * plane];
                r[i] += m[0] * gR + m[3] * gG + m[6] * gB;
                r[i + plane] += m[1] * gR + m[4] * gG + m[7] * gB;
                r[i + 2 * plane] += m[2] * gR + m[5] * gG + m[8] * gB;
            }
        }
    });
}

// (x - mean) * gain + mean, mean per batch item over all channels/pixels.
inline Var contrast(Graph& g, Var x, float gain) {
    const Tensor& xv = g.val(x);
    const int n = xv.dim(0);
    const std::int64_t per = xv.numel() / n;
    std::vector<float> means(static_cast<std::size_t>(n));
    Tensor out(xv.shape);
    for (int ni = 0; ni < n; ++ni) {
        const float* p = xv.data.data() + std::int64_t(ni) * per;
        double m = 0.0;
        for (std::int64_t i = 0; i < per; ++i) m += p[i];
        means[std::size_t(ni)] = float(m / double(per));
        float* o = out.data.data() + std::int64_t(ni) * per;
        for (std::int64_t i = 0; i < per; ++i)
            o[i] = (p[i] - means[std::size_t(ni)]) * gain + means[std::size_t(ni)];
    }
    return g.make({x}, std::move(out), [x, gain, n, per](Graph& g, int self) {
        if (!g.requires_grad(x)) return;
        const Tensor& go = g.grad_of(self);
        Tensor& gx = g.grad(x);
        for (int ni = 0; ni < n; ++ni) {
            const float* o = go.data.data() + std::int64_t(ni) * per;
            float* r = gx.data.data() + std::int64_t(ni) * per;
            double gsum = 0.0;
            for (std::int64_t i = 0; i < per; ++i) gsum += o[i];
            const float uniform = float((1.0 - gain) * gsum / double(per));
            for (std::int64_t i = 0; i < per; ++i) r[i] += gain * o[i] + uniform;
        }
    });
}

}  // namespace sbidetail

// Random pseudo-source: the image perturbed by a random nonempty subset of
// the enabled augmentations, clamped back to [0,1].
inline Var source_transform(Graph& g, Var x, Rng& rng, const SbiConfig& cfg = {}) {
    struct Choice {
        bool jitter, sharpen, translate, resample;
        bool any() const { return jitter || sharpen || translate || resample; }
    } pick{};
    const bool any_enabled = cfg.color_jitter || cfg.sharpen || cfg.translate || cfg.resample;
    if (!any_enabled) return x;  // all perturbations disabled: identity
    for (int attempt = 0; attempt < 16 && !pick.any(); ++attempt) {
        pick.jitter = cfg.color_jitter && rng.coin();
        pick.sharpen = cfg.sharpen && rng.coin();
        pick.translate = cfg.translate && rng.coin();
        pick.resample = cfg.resample && rng.coin();
    }
    if (!pick.any()) {  // degenerate rng stream: force the first enabled kind
        if (cfg.color_jitter) pick.jitter = true;
        else if (cfg.sharpen) pick.sharpen = true;
        else if (cfg.translate) pick.translate = true;
        else pick.resample = true;
    }

    Var out = x;
    if (pick.jitter) {
        const float bright = float(rng.uniform(-cfg.jitter_mag, cfg.jitter_mag));
        const float gain = float(1.0 + rng.uniform(-cfg.jitter_mag, cfg.jitter_mag));
        const double theta = rng.uniform(-cfg.jitter_mag, cfg.jitter_mag) * 2.0 * M_PI;
        out = add_scalar(g, out, bright);
        out = sbidetail::contrast(g, out, gain);
        out = sbidetail::color_matrix(g, out, sbidetail::hue_matrix(theta));
    }
    if (pick.sharpen) {
        const float amount = float(rng.uniform(0.05, cfg.sharpen_max));
        Var blurred = gaussian_blur3(g, out, 1.0);
        out = add(g, out, mul_scalar(g, sub(g, out, blurred), amount));
    }
    if (pick.translate) {
        int dx = 0, dy = 0;
        while (dx == 0 && dy == 0) {
            dx = rng.range_int(-cfg.translate_max, cfg.translate_max);
            dy = rng.range_int(-cfg.translate_max, cfg.translate_max);
        }
        out = translate(g, out, dx, dy);
    }
    if (pick.resample) {
        const double f = rng.uniform(cfg.resample_min, 0.95);
        out = rescale(g, out, f);
    }
    return clamp(g, out, 0.0f, 1.0f);
}

// --- masks -------------------------------------------------------------

namespace sbidetail {

inline void finalize_mask(BlendMask& bm) {
    const int h = bm.mask.dim(0), w = bm.mask.dim(1);
    int cnt = 0;
    bm.bbox_x0 = w;
    bm.bbox_y0 = h;
    bm.bbox_x1 = 0;
    bm.bbox_y1 = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (bm.mask.data[std::size_t(y) * w + x] > 0.5f) {
                ++cnt;
                bm.bbox_x0 = std::min(bm.bbox_x0, x);
                bm.bbox_y0 = std::min(bm.bbox_y0, y);
                bm.bbox_x1 = std::max(bm.bbox_x1, x);
                bm.bbox_y1 = std::max(bm.bbox_y1, y);
            }
    bm.support_fraction = double(cnt) / (double(h) * w);
}

// Smooth random blob in the central region with the requested support area.
inline BlendMask blob_mask(int h, int w, Rng& rng, const SbiConfig& cfg) {
    const double target =
        rng.uniform(cfg.mask_area_min + 0.03, std::min(0.45, cfg.mask_area_max - 0.05));
    Tensor coarse = randn(rng, {8, 8});
    Tensor field = resize_plane(coarse, h, w);
    field = gaussian_blur_plain(field, std::max(2.0, h / 32.0));
    // center emphasis keeps the blob inside the face region
    const double cy = h / 2.0, cx = w / 2.0, rad = 0.42 * std::min(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double d = std::sqrt((y - cy) * (y - cy) + (x - cx) * (x - cx)) / rad;
            field.data[std::size_t(y) * w + x] += float(1.2 * (1.0 - d));
        }
    std::vector<float> sorted(field.data);
    std::nth_element(sorted.begin(),
                     sorted.begin() + std::size_t((1.0 - target) * sorted.size()), sorted.end());
    const float thresh = sorted[std::size_t((1.0 - target) * sorted.size())];
    BlendMask bm;
    bm.mask = Tensor({h, w});
    for (std::int64_t i = 0; i < field.numel(); ++i)
        bm.mask[i] = field[i] >= thresh ? 1.0f : 0.0f;
    bm.mask = gaussian_blur_plain(bm.mask, cfg.feather_sigma);
    finalize_mask(bm);
    return bm;
}

// Andrew monotone chain; returns hull in counter-clockwise order.
inline Landmarks convex_hull(Landmarks pts) {
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return pts;
    auto cross = [](const auto& o, const auto& a, const auto& b) {
        return (double(a.first) - o.first) * (double(b.second) - o.second) -
               (double(a.second) - o.second) * (double(b.first) - o.first);
    };
    Landmarks hull(2 * pts.size());
    size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    const size_t lower = k + 1;
    for (auto it = pts.rbegin(); it != pts.rend(); ++it) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], *it) <= 0) --k;
        hull[k++] = *it;
    }
    hull.resize(k - 1);
    return hull;
}

inline bool point_in_convex(const Landmarks& hull, double x, double y) {
    const size_t n = hull.size();
    if (n < 3) return false;
    for (size_t i = 0; i < n; ++i) {
        const auto& a = hull[i];
        const auto& b = hull[(i + 1) % n];
        const double c = (double(b.first) - a.first) * (y - a.second) -
                         (double(b.second) - a.second) * (x - a.first);
        if (c < 0) return false;
    }
    return true;
}

inline std::optional<BlendMask> hull_mask(int h, int w, const Landmarks& lm, Rng& rng,
                                          const SbiConfig& cfg) {
    if (lm.size() < 4) return std::nullopt;
    // random landmark subset, elastically jittered
    Landmarks subset;
    const size_t keep = std::max<size_t>(4, lm.size() / 2 + rng.below(lm.size() / 2 + 1));
    std::vector<size_t> order(lm.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    const float jit = float(0.05 * std::min(h, w));
    for (size_t i = 0; i < keep && i < order.size(); ++i) {
        auto [x, y] = lm[order[i]];
        subset.emplace_back(x + float(rng.uniform(-jit, jit)), y + float(rng.uniform(-jit, jit)));
    }
    Landmarks hull = convex_hull(subset);
    if (hull.size() < 3) return std::nullopt;
    BlendMask bm;
    bm.mask = Tensor({h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            bm.mask.data[std::size_t(y) * w + x] =
                point_in_convex(hull, x + 0.5, y + 0.5) ? 1.0f : 0.0f;
    bm.mask = gaussian_blur_plain(bm.mask, cfg.feather_sigma);
    finalize_mask(bm);
    return bm;
}

}  // namespace sbidetail

// Convex-hull mask from landmarks when available, smooth-blob fallback
// otherwise. Degenerate hulls (support outside the area bounds) are
// resampled up to 10 times before falling back.
inline BlendMask make_mask(int h, int w, const std::optional<Landmarks>& landmarks, Rng& rng,
                           const SbiConfig& cfg = {}) {
    if (landmarks) {
        for (int attempt = 0; attempt < 10; ++attempt) {
            auto bm = sbidetail::hull_mask(h, w, *landmarks, rng, cfg);
            if (bm && bm->support_fraction >= cfg.mask_area_min &&
                bm->support_fraction <= cfg.mask_area_max)
                return *bm;
        }
    }
    for (int attempt = 0; attempt < 10; ++attempt) {
        BlendMask bm = sbidetail::blob_mask(h, w, rng, cfg);
        if (bm.support_fraction >= cfg.mask_area_min && bm.support_fraction <= cfg.mask_area_max)
            return bm;
    }
    throw std::runtime_error("make_mask: could not draw a mask within area bounds");
}

// out = mask * source + (1-mask) * target, mask broadcast over channels.
inline Var blend(Graph& g, Var target, Var source, const BlendMask& bm) {
    const Tensor& tv = g.val(target);
    if (!tv.same_shape(g.val(source))) throw std::invalid_argument("blend: shape mismatch");
    if (tv.dim(2) != bm.mask.dim(0) || tv.dim(3) != bm.mask.dim(1))
        throw std::invalid_argument("blend: mask size mismatch");
    const int n = tv.dim(0), c = tv.dim(1);
    const std::int64_t plane = std::int64_t(tv.dim(2)) * tv.dim(3);
    Tensor out(tv.shape);
    const Tensor& sv = g.val(source);
    const Tensor m = bm.mask;
    for (std::int64_t p = 0; p < std::int64_t(n) * c; ++p)
        for (std::int64_t i = 0; i < plane; ++i) {
            const float mi = m[i];
            out[p * plane + i] = mi * sv[p * plane + i] + (1.0f - mi) * tv[p * plane + i];
        }
    return g.make({target, source}, std::move(out), [target, source, m, n, c, plane](Graph& g,
                                                                                     int self) {
        const Tensor& go = g.grad_of(self);
        if (g.requires_grad(source)) {
            Tensor& gs = g.grad(source);
            for (std::int64_t p = 0; p < std::int64_t(n) * c; ++p)
                for (std::int64_t i = 0; i < plane; ++i)
                    gs[p * plane + i] += m[i] * go[p * plane + i];
        }
        if (g.requires_grad(target)) {
            Tensor& gt = g.grad(target);
            for (std::int64_t p = 0; p < std::int64_t(n) * c; ++p)
                for (std::int64_t i = 0; i < plane; ++i)
                    gt[p * plane + i] += (1.0f - m[i]) * go[p * plane + i];
        }
    });
}

struct FakeResult {
    Var fake;        // after the trailing benign op
    Var pre_benign;  // blended forgery before it
    BlendMask mask;
    ChannelOp benign;
};

// Full malicious branch: blend a transformed copy of the image into itself,
// then push it through a random benign manipulation.
inline FakeResult generate_fake(Graph& g, Var x_steg, Rng& rng, const SbiConfig& cfg = {},
                                const ChannelRanges& ranges = {},
                                const std::optional<Landmarks>& landmarks = std::nullopt) {
    Var src = source_transform(g, x_steg, rng, cfg);
    BlendMask bm = make_mask(g.val(x_steg).dim(2), g.val(x_steg).dim(3), landmarks, rng, cfg);
    Var pre = blend(g, x_steg, src, bm);
    ChannelOp op = sample_benign(rng, ranges);
    Var out = apply(g, pre, op);
    return FakeResult{out, pre, std::move(bm), op};
}

}  // namespace faceseal
