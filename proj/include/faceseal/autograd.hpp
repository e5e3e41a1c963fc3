#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "faceseal/tensor.hpp"

namespace faceseal {

// Reverse-mode tape. A Graph owns every intermediate tensor of one forward
// pass; backward() sweeps the tape in reverse creation order. Graphs are
// rebuilt per training step and per inference call.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

class Graph {
public:
    using BackwardFn = std::function<void(Graph&, int)>;

    Var leaf(Tensor value, bool requires_grad = false) {
        nodes_.push_back(Node{std::move(value), Tensor{}, requires_grad, false, {}, nullptr});
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    Var constant(Tensor value) { return leaf(std::move(value), false); }

    Var make(std::vector<Var> parents, Tensor value, BackwardFn backward) {
        bool rg = false;
        std::vector<int> pids;
        pids.reserve(parents.size());
        for (Var p : parents) {
            pids.push_back(p.id);
            rg = rg || nodes_[p.id].requires_grad;
        }
        nodes_.push_back(Node{std::move(value), Tensor{}, rg, false,
                              std::move(pids), rg ? std::move(backward) : nullptr});
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    const Tensor& val(Var v) const { return nodes_[v.id].value; }
    Tensor& val_mut(Var v) { return nodes_[v.id].value; }

    bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
    bool has_grad(Var v) const { return nodes_[v.id].grad_alloc; }

    // Gradient accumulator; allocates zeros on first touch.
    Tensor& grad(Var v) {
        Node& n = nodes_[v.id];
        if (!n.grad_alloc) {
            n.grad = Tensor(n.value.shape);
            n.grad_alloc = true;
        }
        return n.grad;
    }

    void backward(Var loss) {
        if (val(loss).numel() != 1)
            throw std::invalid_argument("backward: loss must be scalar");
        grad(loss).data[0] = 1.0f;
        for (int id = loss.id; id >= 0; --id) {
            Node& n = nodes_[id];
            if (n.requires_grad && n.grad_alloc && n.backward) n.backward(*this, id);
        }
    }

    int self_id(Var v) const { return v.id; }
    const Tensor& grad_of(int id) const { return nodes_[id].grad; }
    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        bool grad_alloc = false;
        std::vector<int> parents;
        BackwardFn backward;
    };
    std::vector<Node> nodes_;
};

namespace detail {
inline void axpy(Tensor& dst, const Tensor& src, float a = 1.0f) {
    for (std::int64_t i = 0; i < dst.numel(); ++i) dst[i] += a * src[i];
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

inline Var add(Graph& g, Var a, Var b) {
    if (!g.val(a).same_shape(g.val(b)))
        throw std::invalid_argument("add: shape mismatch " + g.val(a).shape_str() + " vs " +
                                    g.val(b).shape_str());
    Tensor out = g.val(a);
    detail::axpy(out, g.val(b));
    return g.make({a, b}, std::move(out), [a, b](Graph& g, int self) {
        const Tensor& go = g.grad_of(self);
        if (g.requires_grad(a)) detail::axpy(g.grad(a), go);
        if (g.requires_grad(b)) detail::axpy(g.grad(b), go);
    });
}

inline Var sub(Graph& g, Var a, Var b) {
    if (!g.val(a).same_shape(g.val(b)))
        throw std::invalid_argument("sub: shape mismatch " + g.val(a).shape_str() + " vs " +
                                    g.val(b).shape_str());
    Tensor out = g.val(a);
    detail::axpy(out, g.val(b), -1.0f);
    return g.make({a, b}, std::move(out), [a, b](Graph& g, int self) {
        const Tensor& go = g.grad_of(self);
        if (g.requires_grad(a)) detail::axpy(g.grad(a), go);
        if (g.requires_grad(b)) detail::axpy(g.grad(b), go, -1.0f);
    });
}

inline Var mul(Graph& g, Var a, Var b) {
    if (!g.val(a).same_shape(g.val(b)))
        throw std::invalid_argument("mul: shape mismatch");
    Tensor out = g.val(a);
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= g.val(b)[i];
    return g.make({a, b}, std::move(out), [a, b](Graph& g, int self) {
        const Tensor& go = g.grad_of(self);
        if (g.requires_grad(a)) {
            Tensor& ga = g.grad(a);
            const Tensor& bv = g.val(b);
            for (std::int64_t i = 0; i < ga.numel(); ++i) ga[i] += go[i] * bv[i];
        }
        if (g.requires_grad(b)) {
            Tensor& gb = g.grad(b);
            const Tensor& av = g.val(a);
            for (std::int64_t i = 0; i < gb.numel(); ++i) gb[i] += go[i] * av[i];
        }
    });
}

inline Var mul_scalar(Graph& g, Var a, float c) {
    Tensor out = g.val(a);
    for (auto& v : out.data) v *= c;
    return g.make({a}, std::move(out), [a, c](Graph& g, int self) {
        if (g.requires_grad(a)) detail::axpy(g.grad(a), g.grad_of(self), c);
    });
}

inline Var add_scalar(Graph& g, Var a, float c) {
    Tensor out = g.val(a);
    for (auto& v : out.data) v += c;
    return g.make({a}, std::move(out), [a](Graph& g, int self) {
        if (g.requires_grad(a)) detail::axpy(g.grad(a), g.grad_of(self));
    });
}

inline Var vexp(Graph& g, Var a) {
    Tensor out = g.val(a);
    for (auto& v : out.data) v = std::exp(v);
    return g.make({a}, std::move(out), [a](Graph& g, int self) {
        if (!g.requires_grad(a)) return;
        const Tensor& go = g.grad_of(self);
        const Tensor& ov = g.val(Var{self});
        Tensor& ga = g.grad(a);
        for (std::int64_t i = 0; i < ga.numel(); ++i) ga[i] += go[i] * ov[i];
    });
}

inline Var vtanh(Graph& g, Var a) {
    Tensor out = g.val(a);
    for (auto& v : out.data) v = std::tanh(v);
    return g.make({a}, std::move(out), [a](Graph& g, int self) {
        if (!g.requires_grad(a)) return;
        const Tensor& go = g.grad_of(self);
        const Tensor& ov = g.val(Var{self});
        Tensor& ga = g.grad(a);
        for (std::int64_t i = 0; i < ga.numel(); ++i) ga[i] += go[i] * (1.0f - ov[i] * ov[i]);
    });
}

inline Var vsigmoid(Graph& g, Var a) {
    Tensor out = g.val(a);
    for (auto& v : out.data) v = 1.0f / (1.0f + std::exp(-v));
    return g.make({a}, std::move(out), [a](Graph& g, int self) {
        if (!g.requires_grad(a)) return;
        const Tensor& go = g.grad_of(self);
        const Tensor& ov = g.val(Var{self});
        Tensor& ga = g.grad(a);
        for (std::int64_t i = 0; i < ga.numel(); ++i) ga[i] += go[i] * ov[i] * (1.0f - ov[i]);
    });
}

inline Var leaky_relu(Graph& g, Var a, float slope = 0.2f) {
    Tensor out = g.val(a);
    for (auto& v : out.data) v = v >= 0.0f ? v : slope * v;
    return g.make({a}, std::move(out), [a, slope](Graph& g, int self) {
        if (!g.requires_grad(a)) return;
        const Tensor& go = g.grad_of(self);
        const Tensor& av = g.val(a);
        Tensor& ga = g.grad(a);
        for (std::int64_t i = 0; i < ga.numel(); ++i)
            ga[i] += go[i] * (av[i] >= 0.0f ? 1.0f : slope);
    });
}

// Gradient passes only where the input is strictly inside [lo,hi].
inline Var clamp(Graph& g, Var a, float lo, float hi) {
    Tensor out = g.val(a);
    for (auto& v : out.data) v = std::min(hi, std::max(lo, v));
    return g.make({a}, std::move(out), [a, lo, hi](Graph& g, int self) {
        if (!g.requires_grad(a)) return;
        const Tensor& go = g.grad_of(self);
        const Tensor& av = g.val(a);
        Tensor& ga = g.grad(a);
        for (std::int64_t i = 0; i < ga.numel(); ++i)
            if (av[i] > lo && av[i] < hi) ga[i] += go[i];
    });
}

inline Var square(Graph& g, Var a) {
    Tensor out = g.val(a);
    for (auto& v : out.data) v *= v;
    return g.make({a}, std::move(out), [a](Graph& g, int self) {
        if (!g.requires_grad(a)) return;
        const Tensor& go = g.grad_of(self);
        const Tensor& av = g.val(a);
        Tensor& ga = g.grad(a);
        for (std::int64_t i = 0; i < ga.numel(); ++i) ga[i] += go[i] * 2.0f * av[i];
    });
}

// ---------------------------------------------------------------------------
// Reductions and losses
// ---------------------------------------------------------------------------

inline Var sum_all(Graph& g, Var a) {
    double s = 0.0;
    for (float v : g.val(a).data) s += v;
    return g.make({a}, Tensor::scalar(static_cast<float>(s)), [a](Graph& g, int self) {
        if (!g.requires_grad(a)) return;
        float go = g.grad_of(self)[0];
        Tensor& ga = g.grad(a);
        for (auto& v : ga.data) v += go;
    });
}

inline Var mean_all(Graph& g, Var a) {
    double s = 0.0;
    for (float v : g.val(a).data) s += v;
    const float inv_n = 1.0f / static_cast<float>(g.val(a).numel());
    return g.make({a}, Tensor::scalar(static_cast<float>(s) * inv_n),
                  [a, inv_n](Graph& g, int self) {
                      if (!g.requires_grad(a)) return;
                      float go = g.grad_of(self)[0] * inv_n;
                      Tensor& ga = g.grad(a);
                      for (auto& v : ga.data) v += go;
                  });
}

inline Var weighted_sum(Graph& g, const std::vector<Var>& terms,
                        const std::vector<float>& weights) {
    if (terms.size() != weights.size())
        throw std::invalid_argument("weighted_sum: size mismatch");
    double s = 0.0;
    for (size_t i = 0; i < terms.size(); ++i) s += double(weights[i]) * g.val(terms[i])[0];
    auto ts = terms;
    auto ws = weights;
    return g.make(terms, Tensor::scalar(static_cast<float>(s)),
                  [ts, ws](Graph& g, int self) {
                      float go = g.grad_of(self)[0];
                      for (size_t i = 0; i < ts.size(); ++i)
                          if (g.requires_grad(ts[i])) g.grad(ts[i])[0] += go * ws[i];
                  });
}

// Mean over the batch dimension of the per-sample L2 norm (root-sum-square
// over all remaining dimensions). The norm convention used by every loss.
inline Var batch_mean_rss(Graph& g, Var a) {
    const Tensor& x = g.val(a);
    if (x.ndim() < 1) throw std::invalid_argument("batch_mean_rss: needs batch dim");
    const int n = x.dim(0);
    const std::int64_t per = x.numel() / n;
    std::vector<float> rss(static_cast<size_t>(n));
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        const float* p = x.data.data() + static_cast<std::int64_t>(i) * per;
        for (std::int64_t j = 0; j < per; ++j) s += double(p[j]) * p[j];
        rss[i] = static_cast<float>(std::sqrt(s));
        total += rss[i];
    }
    float out = static_cast<float>(total / n);
    return g.make({a}, Tensor::scalar(out), [a, rss, n, per](Graph& g, int self) {
        if (!g.requires_grad(a)) return;
        float go = g.grad_of(self)[0] / static_cast<float>(n);
        const Tensor& x = g.val(a);
        Tensor& ga = g.grad(a);
        for (int i = 0; i < n; ++i) {
            if (rss[i] < 1e-12f) continue;  // subgradient 0 at the cusp
            float scale = go / rss[i];
            const float* p = x.data.data() + static_cast<std::int64_t>(i) * per;
            float* q = ga.data.data() + static_cast<std::int64_t>(i) * per;
            for (std::int64_t j = 0; j < per; ++j) q[j] += scale * p[j];
        }
    });
}

// Numerically stable mean BCE over a patch-logit grid (N,1,h,w) with one
// label per batch element, broadcast over patches.
inline Var bce_with_logits_mean(Graph& g, Var logits, std::vector<float> labels) {
    const Tensor& l = g.val(logits);
    if (l.ndim() != 4 || l.dim(0) != static_cast<int>(labels.size()))
        throw std::invalid_argument("bce_with_logits_mean: want (N,1,h,w) logits + N labels");
    const int n = l.dim(0);
    const std::int64_t per = l.numel() / n;
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        const float y = labels[static_cast<size_t>(i)];
        const float* p = l.data.data() + static_cast<std::int64_t>(i) * per;
        for (std::int64_t j = 0; j < per; ++j) {
            const double x = p[j];
            s += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::fabs(x)));
        }
    }
    const float inv = 1.0f / static_cast<float>(l.numel());
    float out = static_cast<float>(s * inv);
    return g.make({logits}, Tensor::scalar(out),
                  [logits, labels = std::move(labels), n, per, inv](Graph& g, int self) {
                      if (!g.requires_grad(logits)) return;
                      float go = g.grad_of(self)[0] * inv;
                      const Tensor& l = g.val(logits);
                      Tensor& gl = g.grad(logits);
                      for (int i = 0; i < n; ++i) {
                          const float y = labels[static_cast<size_t>(i)];
                          const float* p = l.data.data() + std::int64_t(i) * per;
                          float* q = gl.data.data() + std::int64_t(i) * per;
                          for (std::int64_t j = 0; j < per; ++j) {
                              float sig = 1.0f / (1.0f + std::exp(-p[j]));
                              q[j] += go * (sig - y);
                          }
                      }
                  });
}

// ---------------------------------------------------------------------------
// Shape ops (all on (N,C,H,W))
// ---------------------------------------------------------------------------

inline Var concat_ch(Graph& g, const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_ch: empty");
    const Tensor& first = g.val(parts[0]);
    int n = first.dim(0), h = first.dim(2), w = first.dim(3);
    int ctot = 0;
    for (Var p : parts) {
        const Tensor& t = g.val(p);
        if (t.ndim() != 4 || t.dim(0) != n || t.dim(2) != h || t.dim(3) != w)
            throw std::invalid_argument("concat_ch: incompatible shapes");
        ctot += t.dim(1);
    }
    Tensor out({n, ctot, h, w});
    const std::int64_t plane = std::int64_t(h) * w;
    for (int ni = 0; ni < n; ++ni) {
        std::int64_t coff = 0;
        for (Var p : parts) {
            const Tensor& t = g.val(p);
            const int c = t.dim(1);
            std::copy_n(t.data.data() + (std::int64_t(ni) * c) * plane, std::int64_t(c) * plane,
                        out.data.data() + (std::int64_t(ni) * ctot + coff) * plane);
            coff += c;
        }
    }
    auto ps = parts;
    return g.make(parts, std::move(out), [ps, n, ctot, plane](Graph& g, int self) {
        const Tensor& go = g.grad_of(self);
        for (int ni = 0; ni < n; ++ni) {
            std::int64_t coff = 0;
            for (Var p : ps) {
                const int c = g.val(p).dim(1);
                if (g.requires_grad(p)) {
                    Tensor& gp = g.grad(p);
                    const float* src = go.data.data() + (std::int64_t(ni) * ctot + coff) * plane;
                    float* dst = gp.data.data() + (std::int64_t(ni) * c) * plane;
                    for (std::int64_t i = 0; i < std::int64_t(c) * plane; ++i) dst[i] += src[i];
                }
                coff += c;
            }
        }
    });
}

inline Var slice_ch(Graph& g, Var a, int c0, int c1) {
    const Tensor& x = g.val(a);
    if (x.ndim() != 4 || c0 < 0 || c1 > x.dim(1) || c0 >= c1)
        throw std::invalid_argument("slice_ch: bad range");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int cs = c1 - c0;
    const std::int64_t plane = std::int64_t(h) * w;
    Tensor out({n, cs, h, w});
    for (int ni = 0; ni < n; ++ni)
        std::copy_n(x.data.data() + (std::int64_t(ni) * c + c0) * plane, std::int64_t(cs) * plane,
                    out.data.data() + std::int64_t(ni) * cs * plane);
    return g.make({a}, std::move(out), [a, c0, cs, plane](Graph& g, int self) {
        if (!g.requires_grad(a)) return;
        const Tensor& go = g.grad_of(self);
        Tensor& ga = g.grad(a);
        const int n = g.val(a).dim(0), c = g.val(a).dim(1);
        for (int ni = 0; ni < n; ++ni) {
            const float* src = go.data.data() + std::int64_t(ni) * cs * plane;
            float* dst = ga.data.data() + (std::int64_t(ni) * c + c0) * plane;
            for (std::int64_t i = 0; i < std::int64_t(cs) * plane; ++i) dst[i] += src[i];
        }
    });
}

inline Var concat_batch(Graph& g, const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_batch: empty");
    const Tensor& first = g.val(parts[0]);
    std::vector<int> shape = first.shape;
    int ntot = 0;
    std::int64_t per = first.numel() / first.dim(0);
    for (Var p : parts) {
        const Tensor& t = g.val(p);
        if (t.numel() / t.dim(0) != per) throw std::invalid_argument("concat_batch: shape mismatch");
        ntot += t.dim(0);
    }
    shape[0] = ntot;
    Tensor out(shape);
    std::int64_t off = 0;
    for (Var p : parts) {
        const Tensor& t = g.val(p);
        std::copy(t.data.begin(), t.data.end(), out.data.begin() + off);
        off += t.numel();
    }
    auto ps = parts;
    return g.make(parts, std::move(out), [ps](Graph& g, int self) {
        const Tensor& go = g.grad_of(self);
        std::int64_t off = 0;
        for (Var p : ps) {
            const std::int64_t n = g.val(p).numel();
            if (g.requires_grad(p)) {
                Tensor& gp = g.grad(p);
                for (std::int64_t i = 0; i < n; ++i) gp[i] += go[off + i];
            }
            off += n;
        }
    });
}

inline Var slice_batch(Graph& g, Var a, int n0, int n1) {
    const Tensor& x = g.val(a);
    if (n0 < 0 || n1 > x.dim(0) || n0 >= n1) throw std::invalid_argument("slice_batch: bad range");
    std::vector<int> shape = x.shape;
    shape[0] = n1 - n0;
    const std::int64_t per = x.numel() / x.dim(0);
    Tensor out(shape);
    std::copy_n(x.data.data() + n0 * per, (n1 - n0) * per, out.data.data());
    return g.make({a}, std::move(out), [a, n0, per](Graph& g, int self) {
        if (!g.requires_grad(a)) return;
        const Tensor& go = g.grad_of(self);
        Tensor& ga = g.grad(a);
        float* dst = ga.data.data() + n0 * per;
        for (std::int64_t i = 0; i < go.numel(); ++i) dst[i] += go[i];
    });
}

// Tile (1,C,H,W) -> (N,C,H,W); backward sums over the batch.
inline Var expand_batch(Graph& g, Var a, int n) {
    const Tensor& x = g.val(a);
    if (x.ndim() != 4 || x.dim(0) != 1) throw std::invalid_argument("expand_batch: want (1,C,H,W)");
    std::vector<int> shape = x.shape;
    shape[0] = n;
    Tensor out(shape);
    const std::int64_t per = x.numel();
    for (int i = 0; i < n; ++i)
        std::copy(x.data.begin(), x.data.end(), out.data.begin() + i * per);
    return g.make({a}, std::move(out), [a, n, per](Graph& g, int self) {
        if (!g.requires_grad(a)) return;
        const Tensor& go = g.grad_of(self);
        Tensor& ga = g.grad(a);
        for (int i = 0; i < n; ++i) {
            const float* src = go.data.data() + i * per;
            for (std::int64_t j = 0; j < per; ++j) ga[j] += src[j];
        }
    });
}

}  // namespace faceseal
