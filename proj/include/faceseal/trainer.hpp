#pragma once

#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "faceseal/metrics.hpp"
#include "faceseal/optim.hpp"
#include "faceseal/pipeline.hpp"

namespace faceseal {

// Joint optimization of the steganography network, the detector and the
// secret template: one shared objective (no adversarial alternation), three
// Adam groups with their own learning rates.

struct TrainerState {
    ModelState model;
    std::map<std::string, AdamState> opt;
    std::uint64_t step = 0;
    Rng rng;
    double best_val_auc = -1.0;

    static TrainerState init(const TrainConfig& cfg) {
        TrainerState s;
        s.model = ModelState::init(cfg);
        s.rng = Rng(cfg.seed);
        return s;
    }
};

struct StepStats {
    double loss_steg = 0, loss_sec = 0, loss_rec = 0, loss_det = 0, total = 0;
    double grad_norm = 0;
    bool ok = true;
    std::string diverged;  // component name when !ok
};

struct LabeledBatch {
    Var transmitted;            // (2N,3,H,W): N real then N fake
    std::vector<float> labels;  // 1 real, 0 fake
    Var x;                      // steganographic batch, pre-clip
    std::vector<ChannelOp> real_ops;
};

// Assemble the per-batch real/fake pairs: X = hide(I,S); real = g+(X),
// fake = g+(g-(X)). Twice batch_size labeled samples out.
inline LabeledBatch build_batch(Graph& g, Var host, Var s_template,
                                const BoundStegNetwork& net, Rng& rng,
                                const ChannelRanges& ranges, const SbiConfig& sbi,
                                const std::vector<std::optional<Landmarks>>& landmarks = {}) {
    const int n = g.val(host).dim(0);
    const int h = g.val(host).dim(2), w = g.val(host).dim(3);
    HideResult hr = hide(g, host, expand_batch(g, s_template, n), net);
    std::vector<Var> parts;
    LabeledBatch out;
    for (int i = 0; i < n; ++i) {
        Var xi = slice_batch(g, hr.x, i, i + 1);
        ChannelOp op = sample_benign(rng, ranges);
        out.real_ops.push_back(op);
        parts.push_back(apply(g, xi, op));
        out.labels.push_back(1.0f);
    }
    for (int i = 0; i < n; ++i) {
        Var xi = slice_batch(g, hr.x, i, i + 1);
        auto lm = i < int(landmarks.size()) ? landmarks[i] : std::nullopt;
        parts.push_back(generate_fake(g, xi, rng, sbi, ranges, lm).fake);
        out.labels.push_back(0.0f);
    }
    out.transmitted = concat_batch(g, parts);
    out.x = hr.x;
    (void)h;
    (void)w;
    return out;
}

// Mean over the batch of || I - X ||_2 (root-sum-square per image).
inline Var loss_steg(Graph& g, Var host, Var x) {
    return batch_mean_rss(g, sub(g, host, x));
}

inline Var total_loss(Graph& g, const TrainConfig& cfg, Var l_steg, Var l_sec, Var l_rec,
                      Var l_det) {
    return weighted_sum(g, {l_steg, l_sec, l_rec, l_det},
                        {float(cfg.lambda1), float(cfg.lambda2), float(cfg.lambda3),
                         float(cfg.lambda4)});
}

namespace trainerdetail {

inline void collect_vars(const BoundConv& c, std::vector<Var>& out) {
    out.push_back(c.w);
    out.push_back(c.b);
}
inline void collect_vars(const BoundSubnet& s, std::vector<Var>& out) {
    for (const auto& c : s.convs) collect_vars(c, out);
}
inline void collect_vars(const BoundStegNetwork& n, std::vector<Var>& out) {
    for (const auto& b : n.blocks) {
        collect_vars(b.phi, out);
        collect_vars(b.rho, out);
        collect_vars(b.eta, out);
    }
}
inline void collect_vars(const BoundDetector& d, std::vector<Var>& out) {
    for (const auto& c : d.convs) collect_vars(c, out);
}

struct ParamRef {
    std::string name;
    Tensor* tensor;
    Var var;
    double lr;
};

}  // namespace trainerdetail

// One forward/backward pass and Adam update of all three parameter groups.
// A non-finite loss aborts the step (no update) and names the component.
inline StepStats train_step(TrainerState& st, const Tensor& host_batch,
                            const std::vector<std::optional<Landmarks>>& landmarks = {}) {
    const TrainConfig& cfg = st.model.cfg;
    const int n = host_batch.dim(0);
    const int h = host_batch.dim(2), w = host_batch.dim(3);

    Graph g;
    auto net = bind(g, st.model.steg, true);
    auto det = bind(g, st.model.det, true);
    Var s_tmpl = g.leaf(st.model.tmpl.batch_view(), true);
    Var host = g.constant(host_batch);

    LabeledBatch batch = build_batch(g, host, s_tmpl, net, st.rng, cfg.channel, cfg.sbi,
                                     landmarks);
    Var z = g.constant(sample_latent(st.rng, 2 * n, 3, h, w));
    Var restored = restore(g, batch.transmitted, z, net);

    Var l_steg = loss_steg(g, host, batch.x);
    Var l_sec = loss_sec(g, s_tmpl, host);
    Var l_rec = loss_rec(g, slice_batch(g, restored, 0, n), s_tmpl);
    Var delta = residual(g, expand_batch(g, s_tmpl, 2 * n), restored);
    Var logits = discriminate(g, delta, det);
    Var l_det = bce_patch_loss(g, logits, batch.labels);
    Var total = total_loss(g, cfg, l_steg, l_sec, l_rec, l_det);

    StepStats stats;
    stats.loss_steg = g.val(l_steg)[0];
    stats.loss_sec = g.val(l_sec)[0];
    stats.loss_rec = g.val(l_rec)[0];
    stats.loss_det = g.val(l_det)[0];
    stats.total = g.val(total)[0];
    const std::pair<const char*, double> components[] = {{"steg", stats.loss_steg},
                                                         {"sec", stats.loss_sec},
                                                         {"rec", stats.loss_rec},
                                                         {"det", stats.loss_det}};
    for (auto [name, v] : components)
        if (!std::isfinite(v)) {
            stats.ok = false;
            stats.diverged = name;
            return stats;
        }

    g.backward(total);

    // zip bound leaf vars with the visit order of the parameter structs
    using trainerdetail::ParamRef;
    std::vector<Var> vars;
    std::vector<ParamRef> refs;
    trainerdetail::collect_vars(net, vars);
    {
        size_t i = 0;
        visit_params(st.model.steg, [&](const std::string& name, Tensor& t) {
            refs.push_back(ParamRef{name, &t, vars[i++], cfg.lr_steg});
        });
    }
    vars.clear();
    trainerdetail::collect_vars(det, vars);
    {
        size_t i = 0;
        visit_params(st.model.det, [&](const std::string& name, Tensor& t) {
            refs.push_back(ParamRef{name, &t, vars[i++], cfg.lr_det});
        });
    }
    refs.push_back(ParamRef{"template.data", &st.model.tmpl.data, s_tmpl, cfg.lr_template});

    std::vector<Tensor*> grads;
    for (auto& r : refs) grads.push_back(&g.grad(r.var));
    stats.grad_norm = clip_global_norm(grads, cfg.grad_clip);
    if (!std::isfinite(stats.grad_norm)) {
        stats.ok = false;
        stats.diverged = "gradient";
        return stats;
    }

    for (auto& r : refs) {
        Tensor grad = g.grad(r.var);
        if (r.tensor == &st.model.tmpl.data)
            grad = Tensor(r.tensor->shape, std::move(grad.data));  // drop batch dim view
        adam_step(*r.tensor, grad, st.opt[r.name], r.lr);
    }
    project(st.model.tmpl);
    ++st.step;
    return stats;
}

// Validation AUC under the fixed JPEG channel the paper's robustness story
// centers on; deterministic per call so curves are comparable across steps.
struct ValResult {
    double auc = 0.5;
    double threshold = 0.5;
};

inline ValResult validate(const ModelState& m, const std::vector<Tensor>& val_images,
                          const std::vector<std::optional<Landmarks>>& landmarks,
                          std::uint64_t seed) {
    ChannelPolicy policy;
    policy.fixed = ChannelOp{ChannelKind::jpeg, m.cfg.val_jpeg_qf, 0};
    Rng rng(seed);
    ScoredSamples s = score_split(m, val_images, landmarks, policy, rng);
    ValResult r;
    r.auc = auc(s.scores, s.labels);
    r.threshold = youden_threshold(s);
    return r;
}

struct TrainLogRow {
    std::uint64_t step;
    StepStats stats;
    std::optional<double> val_auc;
};

using ProgressFn = std::function<void(const TrainLogRow&)>;

struct TrainResult {
    double best_val_auc = -1.0;
    std::uint64_t steps_run = 0;
    bool aborted = false;
    std::string abort_reason;
};

inline void pack_trainer(Checkpoint& c, const TrainerState& st);

// Full loop: shuffled-epoch batches, periodic validation, best-checkpoint
// save (atomic via Checkpoint::save).
inline TrainResult train(TrainerState& st, const std::vector<Tensor>& train_images,
                         const std::vector<std::optional<Landmarks>>& train_landmarks,
                         const std::vector<Tensor>& val_images,
                         const std::vector<std::optional<Landmarks>>& val_landmarks,
                         const std::string& checkpoint_path, const std::string& log_csv_path,
                         ProgressFn progress = nullptr) {
    const TrainConfig& cfg = st.model.cfg;
    if (train_images.empty()) throw std::invalid_argument("train: empty training set");

    std::ofstream log;
    if (!log_csv_path.empty()) {
        log.open(log_csv_path);
        log << "step,loss_steg,loss_sec,loss_rec,loss_det,total,grad_norm,val_auc\n";
    }

    const std::uint64_t val_seed = Rng(cfg.seed).fork(0x7a11).next_u64();
    std::vector<size_t> order(train_images.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    size_t cursor = order.size();  // trigger shuffle on first use

    TrainResult result;
    const int h = train_images[0].dim(1), w = train_images[0].dim(2);
    for (int step = 0; step < cfg.steps; ++step) {
        Tensor batch({cfg.batch_size, 3, h, w});
        std::vector<std::optional<Landmarks>> lms;
        for (int b = 0; b < cfg.batch_size; ++b) {
            if (cursor >= order.size()) {
                for (size_t i = order.size(); i > 1; --i)
                    std::swap(order[i - 1], order[st.rng.below(i)]);
                cursor = 0;
            }
            const size_t idx = order[cursor++];
            std::copy(train_images[idx].data.begin(), train_images[idx].data.end(),
                      batch.data.begin() + std::int64_t(b) * 3 * h * w);
            lms.push_back(idx < train_landmarks.size() ? train_landmarks[idx] : std::nullopt);
        }

        StepStats stats = train_step(st, batch, lms);
        TrainLogRow row{st.step, stats, std::nullopt};
        if (!stats.ok) {
            result.aborted = true;
            result.abort_reason = "non-finite loss in component: " + stats.diverged;
            if (progress) progress(row);
            break;
        }

        const bool last = step + 1 == cfg.steps;
        if (!val_images.empty() && (st.step % std::uint64_t(cfg.val_interval) == 0 || last)) {
            ValResult vr = validate(st.model, val_images, val_landmarks, val_seed);
            row.val_auc = vr.auc;
            if (vr.auc >= st.best_val_auc) {
                st.best_val_auc = vr.auc;
                st.model.threshold = vr.threshold;
                if (!checkpoint_path.empty()) {
                    Checkpoint c;
                    pack_trainer(c, st);
                    c.save(checkpoint_path);
                }
            }
        }
        if (log.is_open()) {
            log << st.step << "," << stats.loss_steg << "," << stats.loss_sec << ","
                << stats.loss_rec << "," << stats.loss_det << "," << stats.total << ","
                << stats.grad_norm << ",";
            if (row.val_auc) log << *row.val_auc;
            log << "\n";
            log.flush();
        }
        if (progress) progress(row);
        ++result.steps_run;
    }

    if (!result.aborted && val_images.empty() && !checkpoint_path.empty()) {
        Checkpoint c;
        pack_trainer(c, st);
        c.save(checkpoint_path);
    }
    result.best_val_auc = st.best_val_auc;
    return result;
}

inline void pack_trainer(Checkpoint& c, const TrainerState& st) {
    pack_model(c, st.model);
    for (const auto& [name, s] : st.opt) {
        if (s.m.numel() == 0) continue;
        c.tensors["opt." + name + ".m"] = s.m;
        c.tensors["opt." + name + ".v"] = s.v;
        c.meta["opt." + name + ".t"] = std::to_string(s.t);
    }
    c.meta["meta/step"] = std::to_string(st.step);
    c.meta["meta/best_val_auc"] = std::to_string(st.best_val_auc);
}

inline TrainerState unpack_trainer(const Checkpoint& c) {
    TrainerState st;
    st.model = unpack_model(c);
    st.rng = Rng(st.model.cfg.seed);
    st.step = std::stoull(c.meta_or("meta/step", "0"));
    st.best_val_auc = std::stod(c.meta_or("meta/best_val_auc", "-1"));
    visit_params(st.model, [&](const std::string& name, Tensor&) {
        auto mit = c.tensors.find("opt." + name + ".m");
        if (mit == c.tensors.end()) return;
        AdamState s;
        s.m = mit->second;
        s.v = c.tensor("opt." + name + ".v");
        s.t = std::stoll(c.meta_or("opt." + name + ".t", "0"));
        st.opt[name] = std::move(s);
    });
    return st;
}

}  // namespace faceseal
