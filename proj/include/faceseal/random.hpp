#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "faceseal/tensor.hpp"

namespace faceseal {

// Seeded RNG with hand-rolled uniform/normal mappings so that sampled values
// are identical across standard-library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0,1).
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; one value per call, cached pair discarded for simplicity.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return n ? engine_() % n : 0; }

    int range_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    bool coin(double p = 0.5) { return uniform() < p; }

    // Derive an independent stream; tag keeps sibling streams decorrelated.
    Rng fork(std::uint64_t tag) {
        std::uint64_t s = next_u64() ^ (tag * 0x9e3779b97f4a7c15ull);
        return Rng(s);
    }

private:
    std::mt19937_64 engine_;
};

inline Tensor randn(Rng& rng, std::vector<int> shape, float stddev = 1.0f) {
    Tensor t(std::move(shape));
    for (auto& v : t.data) v = static_cast<float>(rng.normal()) * stddev;
    return t;
}

inline Tensor rand_uniform(Rng& rng, std::vector<int> shape, float lo = 0.0f, float hi = 1.0f) {
    Tensor t(std::move(shape));
    for (auto& v : t.data) v = static_cast<float>(rng.uniform(lo, hi));
    return t;
}

}  // namespace faceseal
