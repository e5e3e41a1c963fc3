#pragma once

#include "faceseal/wavelet.hpp"

namespace faceseal {

// The single learnable secret image. Initialized mid-gray; the LL anchoring
// loss pulls it toward the mean face over training while the restoration
// loss keeps it recoverable from benign transmissions.
struct SecretTemplate {
    Tensor data;  // (3,H,W), kept inside [0,1] by projection after each step

    static SecretTemplate make(int h, int w, int channels = 3) {
        return SecretTemplate{Tensor::full({channels, h, w}, 0.5f)};
    }

    // (1,C,H,W) view for graph use
    Tensor batch_view() const {
        return Tensor({1, data.dim(0), data.dim(1), data.dim(2)}, data.data);
    }
};

template <class F>
void visit_params(SecretTemplate& t, F&& f) {
    f("template.data", t.data);
}

// Mean over the host batch of || DWT_LL(S) - DWT_LL(I) ||_2.
inline Var loss_sec(Graph& g, Var s_template, Var host_batch) {
    const int n = g.val(host_batch).dim(0);
    Var ll_s = expand_batch(g, dwt_ll(g, s_template), n);
    Var ll_i = dwt_ll(g, host_batch);
    return batch_mean_rss(g, sub(g, ll_s, ll_i));
}

// Mean over benign-branch restorations of || S_hat - S ||_2. Fake-branch
// restorations never enter this loss; that asymmetry is what leaves the
// malicious path unconstrained and the scheme semi-fragile.
inline Var loss_rec(Graph& g, Var s_hat_real_batch, Var s_template) {
    const int n = g.val(s_hat_real_batch).dim(0);
    return batch_mean_rss(g, sub(g, s_hat_real_batch, expand_batch(g, s_template, n)));
}

// Clamp to [0,1] after an optimizer update.
inline void project(SecretTemplate& t) {
    for (auto& v : t.data.data) v = std::min(1.0f, std::max(0.0f, v));
}

}  // namespace faceseal
