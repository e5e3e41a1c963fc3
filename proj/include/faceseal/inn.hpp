#pragma once

#include <string>
#include <utility>
#include <vector>

#include "faceseal/nn.hpp"
#include "faceseal/wavelet.hpp"

namespace faceseal {

// Invertible steganography network. Both directions share one parameter set:
// forward hides the secret into the host, backward restores the secret from
// a transmitted image and a Gaussian surrogate latent.
//
// Each affine coupling block updates the two wavelet-stack branches as
//   host'   = host + phi(secret)
//   secret' = secret * exp(alpha * tanh(rho(host'))) + eta(host')
// which is exactly invertible for any parameter values. The tanh clamp keeps
// the exp factor inside [e^-alpha, e^alpha].

struct DenseSubnetParams {
    std::vector<Conv2dParams> convs;  // dense block; final conv zero-initialized

    static DenseSubnetParams make(Rng& rng, int channels, int growth) {
        DenseSubnetParams p;
        for (int i = 0; i < 4; ++i)
            p.convs.push_back(Conv2dParams::make(rng, channels + i * growth, growth, 3, 1, 1));
        p.convs.push_back(
            Conv2dParams::make(rng, channels + 4 * growth, channels, 3, 1, 1, /*zero_init=*/true));
        return p;
    }
};

struct CouplingBlockParams {
    DenseSubnetParams phi, rho, eta;
    float alpha = 2.0f;

    static CouplingBlockParams make(Rng& rng, int channels, int growth, float alpha) {
        return CouplingBlockParams{DenseSubnetParams::make(rng, channels, growth),
                                   DenseSubnetParams::make(rng, channels, growth),
                                   DenseSubnetParams::make(rng, channels, growth), alpha};
    }
};

struct StegNetworkParams {
    std::vector<CouplingBlockParams> blocks;
    int image_channels = 3;
    int growth = 32;

    static constexpr int kNumBlocks = 4;

    static StegNetworkParams make(Rng& rng, int image_channels = 3, int growth = 32,
                                  float alpha = 2.0f) {
        StegNetworkParams p;
        p.image_channels = image_channels;
        p.growth = growth;
        const int ch = 4 * image_channels;  // wavelet stack width
        for (int i = 0; i < kNumBlocks; ++i)
            p.blocks.push_back(CouplingBlockParams::make(rng, ch, growth, alpha));
        return p;
    }
};

template <class F>
void visit_params(DenseSubnetParams& p, const std::string& prefix, F&& f) {
    for (size_t i = 0; i < p.convs.size(); ++i) {
        f(prefix + ".conv" + std::to_string(i) + ".w", p.convs[i].w);
        f(prefix + ".conv" + std::to_string(i) + ".b", p.convs[i].b);
    }
}

template <class F>
void visit_params(StegNetworkParams& p, F&& f) {
    for (size_t i = 0; i < p.blocks.size(); ++i) {
        const std::string b = "steg.block" + std::to_string(i);
        visit_params(p.blocks[i].phi, b + ".phi", f);
        visit_params(p.blocks[i].rho, b + ".rho", f);
        visit_params(p.blocks[i].eta, b + ".eta", f);
    }
}

// --- graph-bound network -----------------------------------------------

struct BoundSubnet {
    std::vector<BoundConv> convs;
};

struct BoundCouplingBlock {
    BoundSubnet phi, rho, eta;
    float alpha;
};

struct BoundStegNetwork {
    std::vector<BoundCouplingBlock> blocks;
};

inline BoundSubnet bind(Graph& g, const DenseSubnetParams& p, bool requires_grad) {
    BoundSubnet b;
    for (const auto& c : p.convs) b.convs.push_back(bind(g, c, requires_grad));
    return b;
}

inline BoundStegNetwork bind(Graph& g, const StegNetworkParams& p, bool requires_grad) {
    BoundStegNetwork b;
    for (const auto& blk : p.blocks)
        b.blocks.push_back(BoundCouplingBlock{bind(g, blk.phi, requires_grad),
                                              bind(g, blk.rho, requires_grad),
                                              bind(g, blk.eta, requires_grad), blk.alpha});
    return b;
}

inline Var run_subnet(Graph& g, const BoundSubnet& net, Var x) {
    std::vector<Var> feats{x};
    for (size_t i = 0; i + 1 < net.convs.size(); ++i) {
        Var in = feats.size() == 1 ? feats[0] : concat_ch(g, feats);
        feats.push_back(leaky_relu(g, apply(g, net.convs[i], in), 0.2f));
    }
    return apply(g, net.convs.back(), concat_ch(g, feats));
}

inline std::pair<Var, Var> coupling_forward(Graph& g, Var host, Var secret,
                                            const BoundCouplingBlock& blk) {
    Var h2 = add(g, host, run_subnet(g, blk.phi, secret));
    Var scale = vexp(g, mul_scalar(g, vtanh(g, run_subnet(g, blk.rho, h2)), blk.alpha));
    Var s2 = add(g, mul(g, secret, scale), run_subnet(g, blk.eta, h2));
    return {h2, s2};
}

inline std::pair<Var, Var> coupling_inverse(Graph& g, Var host2, Var secret2,
                                            const BoundCouplingBlock& blk) {
    Var scale = vexp(g, mul_scalar(g, vtanh(g, run_subnet(g, blk.rho, host2)), -blk.alpha));
    Var s = mul(g, sub(g, secret2, run_subnet(g, blk.eta, host2)), scale);
    Var h = sub(g, host2, run_subnet(g, blk.phi, s));
    return {h, s};
}

struct HideResult {
    Var x;  // steganographic image, pre-clip (clip and quantize at export only)
    Var z;  // discarded latent branch
};

inline HideResult hide(Graph& g, Var host, Var secret, const BoundStegNetwork& net) {
    if (!g.val(host).same_shape(g.val(secret)))
        throw std::invalid_argument("hide: host/secret shape mismatch");
    if (!g.val(host).all_finite() || !g.val(secret).all_finite())
        throw std::domain_error("hide: non-finite input");
    Var h = dwt_stack(g, host);
    Var s = dwt_stack(g, secret);
    for (const auto& blk : net.blocks) std::tie(h, s) = coupling_forward(g, h, s, blk);
    return HideResult{iwt_stack(g, h), s};
}

inline Var restore(Graph& g, Var x_received, Var z_prime, const BoundStegNetwork& net) {
    if (!g.val(x_received).all_finite()) throw std::domain_error("restore: non-finite input");
    Var h = dwt_stack(g, x_received);
    Var s = z_prime;
    if (!g.val(s).same_shape(g.val(h)))
        throw std::invalid_argument("restore: latent shape mismatch");
    for (auto it = net.blocks.rbegin(); it != net.blocks.rend(); ++it)
        std::tie(h, s) = coupling_inverse(g, h, s, *it);
    return iwt_stack(g, s);
}

// --- tensor-level convenience (inference; builds a throwaway graph) -----

struct HideTensors {
    Tensor x;
    Tensor z;
};

inline HideTensors hide_tensors(const StegNetworkParams& params, const Tensor& host,
                                const Tensor& secret) {
    Graph g;
    auto net = bind(g, params, false);
    Tensor h4 = host.ndim() == 3 ? Tensor({1, host.dim(0), host.dim(1), host.dim(2)}, host.data)
                                 : host;
    Tensor s4 = secret.ndim() == 3
                    ? Tensor({1, secret.dim(0), secret.dim(1), secret.dim(2)}, secret.data)
                    : secret;
    auto r = hide(g, g.constant(std::move(h4)), g.constant(std::move(s4)), net);
    HideTensors out{g.val(r.x), g.val(r.z)};
    if (host.ndim() == 3) {
        out.x = Tensor({out.x.dim(1), out.x.dim(2), out.x.dim(3)}, std::move(out.x.data));
    }
    return out;
}

inline Tensor restore_tensors(const StegNetworkParams& params, const Tensor& x_received,
                              const Tensor& z_prime) {
    Graph g;
    auto net = bind(g, params, false);
    const bool chw = x_received.ndim() == 3;
    Tensor x4 = chw ? Tensor({1, x_received.dim(0), x_received.dim(1), x_received.dim(2)},
                             x_received.data)
                    : x_received;
    Tensor z4 = z_prime.ndim() == 3
                    ? Tensor({1, z_prime.dim(0), z_prime.dim(1), z_prime.dim(2)}, z_prime.data)
                    : z_prime;
    Var s = restore(g, g.constant(std::move(x4)), g.constant(std::move(z4)), net);
    Tensor out = g.val(s);
    if (chw) out = Tensor({out.dim(1), out.dim(2), out.dim(3)}, std::move(out.data));
    return out;
}

// Standard-normal latent matching the wavelet-stack shape of an image batch.
inline Tensor sample_latent(Rng& rng, int n, int image_channels, int h, int w) {
    return randn(rng, {n, 4 * image_channels, h / 2, w / 2});
}

}  // namespace faceseal
