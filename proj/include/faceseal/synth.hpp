#pragma once

// Deterministic procedural face images for desk-scale corpora: an elliptical
// head with eyes/brows/nose/mouth, per-face color and geometry jitter, mild
// texture noise. Not photorealistic; structured enough that the mean face is
// face-like and forgeries have something to corrupt.

#include <array>
#include <utility>
#include <vector>

#include "faceseal/imgproc.hpp"
#include "faceseal/random.hpp"
#include "faceseal/sbi.hpp"  // Landmarks
#include "faceseal/tensor.hpp"

namespace faceseal {

struct SynthFace {
    Tensor image;  // (3,S,S) in [0,1]
    Landmarks landmarks;
};

namespace synthdetail {

inline double smoothstep(double e0, double e1, double x) {
    const double t = std::min(1.0, std::max(0.0, (x - e0) / (e1 - e0)));
    return t * t * (3.0 - 2.0 * t);
}

struct Painter {
    Tensor& img;
    int s;

    void blend_px(int x, int y, double a, const std::array<double, 3>& rgb) {
        if (x < 0 || y < 0 || x >= s || y >= s || a <= 0.0) return;
        for (int c = 0; c < 3; ++c) {
            float& v = img.at3(c, y, x);
            v = float(v * (1.0 - a) + rgb[c] * a);
        }
    }

    // soft-edged ellipse, optional vertical squash of the top/bottom half
    void ellipse(double cx, double cy, double rx, double ry, const std::array<double, 3>& rgb,
                 double alpha = 1.0, double soft = 1.5) {
        const int x0 = std::max(0, int(cx - rx - 2)), x1 = std::min(s - 1, int(cx + rx + 2));
        const int y0 = std::max(0, int(cy - ry - 2)), y1 = std::min(s - 1, int(cy + ry + 2));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const double dx = (x + 0.5 - cx) / rx, dy = (y + 0.5 - cy) / ry;
                const double d = std::sqrt(dx * dx + dy * dy);
                const double edge = soft / std::min(rx, ry);
                blend_px(x, y, alpha * smoothstep(1.0 + edge, 1.0 - edge, d), rgb);
            }
    }
};

}  // namespace synthdetail

inline SynthFace make_face(Rng& rng, int size = 256) {
    using synthdetail::Painter;
    const int s = size;
    SynthFace out;
    out.image = Tensor({3, s, s});
    Tensor& img = out.image;

    // background: vertical gradient between two muted colors
    std::array<double, 3> bg0, bg1;
    for (int c = 0; c < 3; ++c) {
        bg0[c] = rng.uniform(0.15, 0.75);
        bg1[c] = rng.uniform(0.15, 0.75);
    }
    for (int y = 0; y < s; ++y) {
        const double t = double(y) / (s - 1);
        for (int x = 0; x < s; ++x)
            for (int c = 0; c < 3; ++c)
                img.at3(c, y, x) = float(bg0[c] * (1 - t) + bg1[c] * t);
    }

    Painter p{img, s};
    const double cx = s * rng.uniform(0.46, 0.54);
    const double cy = s * rng.uniform(0.48, 0.56);
    const double hrx = s * rng.uniform(0.26, 0.34);
    const double hry = s * rng.uniform(0.34, 0.42);

    // skin
    const double tone = rng.uniform(0.45, 1.0);
    const std::array<double, 3> skin = {0.93 * tone + 0.05, 0.74 * tone + 0.04,
                                        0.60 * tone + 0.03};
    std::array<double, 3> skin_shade = {skin[0] * 0.78, skin[1] * 0.76, skin[2] * 0.74};

    // hair behind the head
    const std::array<double, 3> hair = {rng.uniform(0.02, 0.45), rng.uniform(0.02, 0.35),
                                        rng.uniform(0.02, 0.3)};
    p.ellipse(cx, cy - 0.25 * hry, hrx * 1.18, hry * 1.05, hair);

    // head with a simple two-tone shading
    p.ellipse(cx, cy, hrx, hry, skin_shade);
    p.ellipse(cx - 0.06 * hrx, cy - 0.04 * hry, hrx * 0.92, hry * 0.94, skin);

    // hair fringe on top
    p.ellipse(cx, cy - 0.72 * hry, hrx * 0.98, hry * rng.uniform(0.30, 0.45), hair);

    // eyes
    const double eye_dx = hrx * rng.uniform(0.40, 0.5);
    const double eye_y = cy - hry * rng.uniform(0.10, 0.18);
    const double eye_rx = hrx * 0.19, eye_ry = hrx * rng.uniform(0.085, 0.12);
    const std::array<double, 3> iris = {rng.uniform(0.05, 0.55), rng.uniform(0.1, 0.45),
                                        rng.uniform(0.05, 0.6)};
    for (int side = -1; side <= 1; side += 2) {
        const double ex = cx + side * eye_dx;
        p.ellipse(ex, eye_y, eye_rx, eye_ry, {0.95, 0.95, 0.93});
        p.ellipse(ex, eye_y, eye_rx * 0.42, eye_ry * 0.85, iris);
        p.ellipse(ex, eye_y, eye_rx * 0.18, eye_ry * 0.42, {0.02, 0.02, 0.02});
        p.ellipse(ex - eye_rx * 0.1, eye_y - eye_ry * 0.25, eye_rx * 0.07, eye_ry * 0.18,
                  {0.9, 0.9, 0.9});
        // brow
        p.ellipse(ex, eye_y - eye_ry * rng.uniform(2.0, 2.8), eye_rx * 1.05, eye_ry * 0.38,
                  {hair[0] * 0.8, hair[1] * 0.8, hair[2] * 0.8}, 0.9);
    }

    // nose: soft shading stroke + tip
    const double nose_y = cy + hry * rng.uniform(0.08, 0.14);
    p.ellipse(cx, (eye_y + nose_y) / 2, hrx * 0.055, (nose_y - eye_y) * 0.55, skin_shade, 0.55);
    p.ellipse(cx, nose_y, hrx * 0.10, hrx * 0.05, skin_shade, 0.7);
    p.ellipse(cx - hrx * 0.06, nose_y + hrx * 0.015, hrx * 0.022, hrx * 0.015,
              {0.25, 0.15, 0.12}, 0.7);
    p.ellipse(cx + hrx * 0.06, nose_y + hrx * 0.015, hrx * 0.022, hrx * 0.015,
              {0.25, 0.15, 0.12}, 0.7);

    // mouth
    const double mouth_y = cy + hry * rng.uniform(0.42, 0.52);
    const double mouth_rx = hrx * rng.uniform(0.30, 0.42);
    const std::array<double, 3> lip = {rng.uniform(0.55, 0.8), rng.uniform(0.2, 0.35),
                                       rng.uniform(0.25, 0.38)};
    p.ellipse(cx, mouth_y, mouth_rx, hrx * 0.085, lip);
    p.ellipse(cx, mouth_y, mouth_rx * 0.92, hrx * 0.02, {lip[0] * 0.5, lip[1] * 0.5, lip[2] * 0.5},
              0.8);

    // cheeks
    p.ellipse(cx - eye_dx, nose_y, hrx * 0.14, hrx * 0.09, {0.9, 0.45, 0.4}, 0.12);
    p.ellipse(cx + eye_dx, nose_y, hrx * 0.14, hrx * 0.09, {0.9, 0.45, 0.4}, 0.12);

    // mild texture noise then a gentle blur
    for (auto& v : img.data)
        v = float(std::min(1.0, std::max(0.0, v + rng.normal() * 0.008)));
    img = gaussian_blur_plain(img, 0.6);

    // landmarks: head outline (12) + eyes + brows + nose tip + mouth corners
    for (int i = 0; i < 12; ++i) {
        const double a = 2.0 * M_PI * i / 12.0;
        out.landmarks.emplace_back(float(cx + hrx * std::cos(a)), float(cy + hry * std::sin(a)));
    }
    out.landmarks.emplace_back(float(cx - eye_dx), float(eye_y));
    out.landmarks.emplace_back(float(cx + eye_dx), float(eye_y));
    out.landmarks.emplace_back(float(cx - eye_dx), float(eye_y - eye_ry * 2.4));
    out.landmarks.emplace_back(float(cx + eye_dx), float(eye_y - eye_ry * 2.4));
    out.landmarks.emplace_back(float(cx), float(nose_y));
    out.landmarks.emplace_back(float(cx - mouth_rx), float(mouth_y));
    out.landmarks.emplace_back(float(cx + mouth_rx), float(mouth_y));
    return out;
}

}  // namespace faceseal
