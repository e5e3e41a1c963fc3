#pragma once

#include <optional>
#include <vector>

#include "faceseal/channel.hpp"
#include "faceseal/checkpoint.hpp"
#include "faceseal/config.hpp"
#include "faceseal/detector.hpp"
#include "faceseal/inn.hpp"
#include "faceseal/sbi.hpp"
#include "faceseal/secret_template.hpp"

namespace faceseal {

// Everything a verifier needs: the shared invertible network, the secret
// template, the detector and the calibrated decision threshold.
struct ModelState {
    TrainConfig cfg;
    StegNetworkParams steg;
    DetectorParams det;
    SecretTemplate tmpl;
    double threshold = 0.5;

    static ModelState init(const TrainConfig& cfg) {
        ModelState m;
        m.cfg = cfg;
        Rng init_rng = Rng(cfg.seed).fork(0x1417);
        m.steg = StegNetworkParams::make(init_rng, 3, cfg.subnet_growth,
                                         float(cfg.alpha_clamp));
        m.det = DetectorParams::make(init_rng, 3, cfg.detector_width);
        m.tmpl = SecretTemplate::make(cfg.image_size, cfg.image_size);
        return m;
    }
};

template <class F>
void visit_params(ModelState& m, F&& f) {
    visit_params(m.steg, f);
    visit_params(m.det, f);
    visit_params(m.tmpl, f);
}

// Default latent seed for reproducible verification scores.
constexpr std::uint64_t kVerifyLatentSeed = 0xFACE5EA1u;

// Embed the template into a host image. Returns the raw (unclipped) tensor;
// clipping and quantization happen at export.
inline Tensor protect_image(const ModelState& m, const Tensor& host) {
    if (host.ndim() != 3 || host.dim(0) != 3)
        throw std::invalid_argument("protect: want (3,H,W) host");
    if (host.dim(1) != m.cfg.image_size || host.dim(2) != m.cfg.image_size)
        throw std::invalid_argument("protect: image size does not match the checkpoint");
    return hide_tensors(m.steg, host, m.tmpl.data).x;
}

// Restore the template from a transmitted image with a seeded Gaussian
// latent and score the residual. `draws` > 1 averages over independent
// latents (the --stochastic path).
inline DetectionScore verify_image(const ModelState& m, const Tensor& transmitted,
                                   std::uint64_t latent_seed = kVerifyLatentSeed,
                                   int draws = 1) {
    if (transmitted.ndim() != 3 || transmitted.dim(0) != 3)
        throw std::invalid_argument("verify: want (3,H,W) image");
    Rng rng(latent_seed);
    double acc = 0.0;
    for (int k = 0; k < std::max(1, draws); ++k) {
        Tensor z = sample_latent(rng, 1, 3, transmitted.dim(1), transmitted.dim(2));
        z = Tensor({z.dim(1), z.dim(2), z.dim(3)}, std::move(z.data));
        Tensor restored = restore_tensors(m.steg, transmitted, z);
        Tensor delta(restored.shape);
        for (std::int64_t i = 0; i < delta.numel(); ++i)
            delta[i] = m.tmpl.data[i] - restored[i];
        acc += discriminate_score(m.det, delta);
    }
    return DetectionScore{acc / std::max(1, draws), m.threshold};
}

// --- batched scoring for validation / evaluation -------------------------

struct ScoredSamples {
    std::vector<double> scores;
    std::vector<int> labels;  // 1 real, 0 fake
};

// Channel applied to each branch: either one fixed op (strength sweeps,
// validation) or fresh samples from the training ranges.
struct ChannelPolicy {
    std::optional<ChannelOp> fixed;
    ChannelRanges ranges;

    ChannelOp next(Rng& rng) const { return fixed ? *fixed : sample_benign(rng, ranges); }
};

// For every host image: protect, push the real branch g+(X) and the fake
// branch g+(g-(X)) through the channel, restore both with Gaussian latents,
// and score the residuals.
inline ScoredSamples score_split(const ModelState& m, const std::vector<Tensor>& hosts,
                                 const std::vector<std::optional<Landmarks>>& landmarks,
                                 const ChannelPolicy& policy, Rng& rng) {
    ScoredSamples out;
    if (hosts.empty()) return out;
    const int h = hosts[0].dim(1), w = hosts[0].dim(2);
    // keep inference graphs below ~0.5 GB: fewer images per chunk when large
    const int chunk = std::max(1, (64 * 64 * 4) / (h * w) * 4);

    for (size_t base = 0; base < hosts.size(); base += size_t(chunk)) {
        const int n = int(std::min(hosts.size() - base, size_t(chunk)));
        Graph g;
        auto net = bind(g, m.steg, false);
        auto det = bind(g, m.det, false);
        Tensor host_batch({n, 3, h, w});
        for (int i = 0; i < n; ++i)
            std::copy(hosts[base + i].data.begin(), hosts[base + i].data.end(),
                      host_batch.data.begin() + std::int64_t(i) * 3 * h * w);
        Var host = g.constant(std::move(host_batch));
        Var s_tmpl = g.constant(m.tmpl.batch_view());
        HideResult hr = hide(g, host, expand_batch(g, s_tmpl, n), net);

        std::vector<Var> transmitted;
        for (int i = 0; i < n; ++i) {
            Var xi = slice_batch(g, hr.x, i, i + 1);
            transmitted.push_back(apply(g, xi, policy.next(rng)));
        }
        for (int i = 0; i < n; ++i) {
            Var xi = slice_batch(g, hr.x, i, i + 1);
            Var src = source_transform(g, xi, rng, m.cfg.sbi);
            BlendMask bm = make_mask(h, w, landmarks.empty() ? std::nullopt : landmarks[base + i],
                                     rng, m.cfg.sbi);
            transmitted.push_back(apply(g, blend(g, xi, src, bm), policy.next(rng)));
        }
        Var all = concat_batch(g, transmitted);
        Var z = g.constant(sample_latent(rng, 2 * n, 3, h, w));
        Var restored = restore(g, all, z, net);
        Var delta = residual(g, expand_batch(g, s_tmpl, 2 * n), restored);
        Var logits = discriminate(g, delta, det);
        const Tensor& lv = g.val(logits);
        const std::int64_t per = lv.numel() / (2 * n);
        for (int i = 0; i < 2 * n; ++i) {
            double msum = 0.0;
            for (std::int64_t j = 0; j < per; ++j) msum += lv[std::int64_t(i) * per + j];
            out.scores.push_back(1.0 / (1.0 + std::exp(-msum / double(per))));
            out.labels.push_back(i < n ? 1 : 0);
        }
    }
    return out;
}

// Decision threshold maximizing TPR - FPR on scored samples.
inline double youden_threshold(const ScoredSamples& s) {
    if (s.scores.empty()) return 0.5;
    std::vector<double> cand = s.scores;
    std::sort(cand.begin(), cand.end());
    double best_j = -1.0, best_t = 0.5;
    for (size_t i = 0; i + 1 <= cand.size(); ++i) {
        const double t = i + 1 < cand.size() ? 0.5 * (cand[i] + cand[i + 1])
                                             : cand[i] + 1e-6;
        int tp = 0, fp = 0, pos = 0, neg = 0;
        for (size_t k = 0; k < s.scores.size(); ++k) {
            if (s.labels[k] == 1) {
                ++pos;
                if (s.scores[k] >= t) ++tp;
            } else {
                ++neg;
                if (s.scores[k] >= t) ++fp;
            }
        }
        const double j = (pos ? double(tp) / pos : 0.0) - (neg ? double(fp) / neg : 0.0);
        if (j > best_j) {
            best_j = j;
            best_t = t;
        }
    }
    return best_t;
}

// --- checkpoint packing ---------------------------------------------------

inline void pack_model(Checkpoint& c, const ModelState& m) {
    ModelState& mm = const_cast<ModelState&>(m);
    visit_params(mm, [&](const std::string& key, Tensor& t) { c.tensors[key] = t; });
    c.meta["meta/config"] = serialize(m.cfg);
    c.meta["meta/threshold"] = std::to_string(m.threshold);
}

inline ModelState unpack_model(const Checkpoint& c) {
    std::istringstream cfg_in(c.meta_or("meta/config", ""));
    ModelState m = ModelState::init(parse_config(cfg_in));
    visit_params(m, [&](const std::string& key, Tensor& t) {
        const Tensor& src = c.tensor(key);
        if (src.shape != t.shape)
            throw std::runtime_error("checkpoint shape mismatch for " + key);
        t = src;
    });
    m.threshold = std::stod(c.meta_or("meta/threshold", "0.5"));
    return m;
}

}  // namespace faceseal
