#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "faceseal/tensor.hpp"

namespace faceseal {

struct AdamState {
    Tensor m, v;
    std::int64_t t = 0;
};

inline void adam_step(Tensor& param, const Tensor& grad, AdamState& st, double lr,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    if (st.m.numel() != param.numel()) {
        st.m = Tensor(param.shape);
        st.v = Tensor(param.shape);
        st.t = 0;
    }
    ++st.t;
    const double bc1 = 1.0 - std::pow(beta1, double(st.t));
    const double bc2 = 1.0 - std::pow(beta2, double(st.t));
    for (std::int64_t i = 0; i < param.numel(); ++i) {
        const double gi = grad[i];
        const double m = beta1 * st.m[i] + (1.0 - beta1) * gi;
        const double v = beta2 * st.v[i] + (1.0 - beta2) * gi * gi;
        st.m[i] = float(m);
        st.v[i] = float(v);
        param[i] -= float(lr * (m / bc1) / (std::sqrt(v / bc2) + eps));
    }
}

inline double global_grad_norm(const std::vector<const Tensor*>& grads) {
    double s = 0.0;
    for (const Tensor* g : grads) s += sum_sq(*g);
    return std::sqrt(s);
}

// Scale all gradients so their global norm does not exceed max_norm.
inline double clip_global_norm(const std::vector<Tensor*>& grads, double max_norm) {
    std::vector<const Tensor*> view(grads.begin(), grads.end());
    const double norm = global_grad_norm(view);
    if (norm > max_norm && norm > 0.0) {
        const float scale = float(max_norm / norm);
        for (Tensor* g : grads)
            for (auto& v : g->data) v *= scale;
    }
    return norm;
}

}  // namespace faceseal
