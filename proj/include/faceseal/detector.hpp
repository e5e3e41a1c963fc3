#pragma once

#include <string>
#include <vector>

#include "faceseal/nn.hpp"

namespace faceseal {

// Patch discriminator over the template residual (70x70 receptive field,
// four strided conv layers plus the 1-channel head). Scores are the
// probability that the transmitted image is REAL (y=1 real, y=0 fake).

struct DetectorParams {
    std::vector<Conv2dParams> convs;
    int base_width = 64;

    static DetectorParams make(Rng& rng, int in_channels = 3, int base_width = 64) {
        DetectorParams p;
        p.base_width = base_width;
        const int w = base_width;
        p.convs.push_back(Conv2dParams::make(rng, in_channels, w, 4, 2, 1));
        p.convs.push_back(Conv2dParams::make(rng, w, 2 * w, 4, 2, 1));
        p.convs.push_back(Conv2dParams::make(rng, 2 * w, 4 * w, 4, 2, 1));
        p.convs.push_back(Conv2dParams::make(rng, 4 * w, 8 * w, 4, 1, 1));
        p.convs.push_back(Conv2dParams::make(rng, 8 * w, 1, 4, 1, 1));
        return p;
    }
};

template <class F>
void visit_params(DetectorParams& p, F&& f) {
    for (size_t i = 0; i < p.convs.size(); ++i) {
        f("det.conv" + std::to_string(i) + ".w", p.convs[i].w);
        f("det.conv" + std::to_string(i) + ".b", p.convs[i].b);
    }
}

struct BoundDetector {
    std::vector<BoundConv> convs;
};

inline BoundDetector bind(Graph& g, const DetectorParams& p, bool requires_grad) {
    BoundDetector b;
    for (const auto& c : p.convs) b.convs.push_back(bind(g, c, requires_grad));
    return b;
}

// Residual between the original template and a restored one: plain
// subtraction, no clipping (the discriminator wants the raw signal).
inline Var residual(Graph& g, Var s_original, Var s_restored) {
    return sub(g, s_original, s_restored);
}

inline Var discriminate(Graph& g, Var delta, const BoundDetector& det) {
    Var h = delta;
    for (size_t i = 0; i + 1 < det.convs.size(); ++i)
        h = leaky_relu(g, apply(g, det.convs[i], h), 0.2f);
    return apply(g, det.convs.back(), h);
}

struct DetectionScore {
    double prob_real = 0.0;
    double threshold = 0.5;
    bool is_real() const { return prob_real >= threshold; }
};

// Patch-to-scalar reduction: mean of logits, then sigmoid.
inline double score_logits(const Tensor& logits) {
    double m = 0.0;
    for (float v : logits.data) m += v;
    m /= double(logits.numel());
    return 1.0 / (1.0 + std::exp(-m));
}

inline DetectionScore score(const Tensor& logits, double threshold = 0.5) {
    return DetectionScore{score_logits(logits), threshold};
}

// Mean BCE over patches with one broadcast label per batch element.
inline Var bce_patch_loss(Graph& g, Var logits, const std::vector<float>& labels) {
    return bce_with_logits_mean(g, logits, labels);
}

// Tensor-level scoring used by verification/evaluation paths.
inline double discriminate_score(const DetectorParams& params, const Tensor& delta) {
    Graph g;
    auto det = bind(g, params, false);
    Tensor d4 = delta.ndim() == 3
                    ? Tensor({1, delta.dim(0), delta.dim(1), delta.dim(2)}, delta.data)
                    : delta;
    Var logits = discriminate(g, g.constant(std::move(d4)), det);
    return score_logits(g.val(logits));
}

}  // namespace faceseal
