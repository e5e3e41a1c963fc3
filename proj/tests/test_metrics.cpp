#include <catch2/catch_amalgamated.hpp>

#include "faceseal/metrics.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace faceseal;

TEST_CASE("auc: frozen hand case and trivials") {
    // pair counting by hand: 3 of 4 real-fake pairs ranked correctly
    CHECK(auc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) == Catch::Approx(0.75));

    // perfect separation
    CHECK(auc({0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0}) == Catch::Approx(1.0));
    // constant scores carry no information
    CHECK(auc({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}) == Catch::Approx(0.5));
    // degenerate label sets
    CHECK(auc({0.3, 0.7}, {1, 1}) == Catch::Approx(0.5));
}

TEST_CASE("auc: matches the exhaustive pair-counting oracle with ties") {
    Rng rng(91);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> scores;
        std::vector<int> labels;
        const int n = 3 + int(rng.below(40));
        for (int i = 0; i < n; ++i) {
            // quantized scores generate plenty of ties
            scores.push_back(std::floor(rng.uniform() * 8.0) / 8.0);
            labels.push_back(rng.coin() ? 1 : 0);
        }
        CHECK(auc(scores, labels) == Catch::Approx(oracle::auc_pairs(scores, labels)).margin(1e-12));
    }
}

TEST_CASE("auc: invariant under strictly monotone score transforms") {
    Rng rng(92);
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < 60; ++i) {
        scores.push_back(rng.uniform());
        labels.push_back(rng.coin() ? 1 : 0);
    }
    const double base = auc(scores, labels);
    std::vector<double> logit(scores.size()), cubed(scores.size());
    for (size_t i = 0; i < scores.size(); ++i) {
        logit[i] = std::log(scores[i] / (1.0 - scores[i] + 1e-12));
        cubed[i] = scores[i] * scores[i] * scores[i];
    }
    CHECK(auc(logit, labels) == Catch::Approx(base).margin(1e-12));
    CHECK(auc(cubed, labels) == Catch::Approx(base).margin(1e-12));
}

TEST_CASE("psnr: closed forms, symmetry, cap") {
    Tensor a = Tensor::full({3, 8, 8}, 0.5f);
    CHECK(psnr(a, a) == 100.0);

    Tensor zeros({3, 8, 8});
    Tensor ones = Tensor::full({3, 8, 8}, 1.0f);
    CHECK(psnr(zeros, ones) == Catch::Approx(0.0).margin(1e-9));

    // uniform 0.1 offset: mse = 0.01 -> 20 dB
    Tensor b = a;
    for (auto& v : b.data) v += 0.1f;
    CHECK(psnr(a, b) == Catch::Approx(20.0).margin(1e-4));
    CHECK(psnr(b, a) == Catch::Approx(psnr(a, b)).margin(1e-12));
}

namespace {
// independent scalar-loop SSIM: same definition, nested loops in double
double ssim_scalar(const Tensor& a, const Tensor& b) {
    const double c1 = 1e-4, c2 = 9e-4, sigma = 1.5;
    const int radius = 5;
    std::vector<double> k(2 * radius + 1);
    double ks = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        ks += k[i + radius];
    }
    for (auto& v : k) v /= ks;
    auto reflect = [](int i, int n) {
        while (i < 0 || i >= n) i = i < 0 ? -i : 2 * n - 2 - i;
        return i;
    };
    const int c = a.dim(0), h = a.dim(1), w = a.dim(2);
    double acc = 0.0;
    for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double ma = 0, mb = 0, maa = 0, mbb = 0, mab = 0;
                for (int dy = -radius; dy <= radius; ++dy)
                    for (int dx = -radius; dx <= radius; ++dx) {
                        const double wgt = k[dy + radius] * k[dx + radius];
                        const double va = a.at3(ci, reflect(y + dy, h), reflect(x + dx, w));
                        const double vb = b.at3(ci, reflect(y + dy, h), reflect(x + dx, w));
                        ma += wgt * va;
                        mb += wgt * vb;
                        maa += wgt * va * va;
                        mbb += wgt * vb * vb;
                        mab += wgt * va * vb;
                    }
                const double va = maa - ma * ma, vb = mbb - mb * mb, cab = mab - ma * mb;
                acc += ((2 * ma * mb + c1) * (2 * cab + c2)) /
                       ((ma * ma + mb * mb + c1) * (va + vb + c2));
            }
    return acc / double(a.numel());
}
}  // namespace

TEST_CASE("ssim: trivials and the scalar-loop oracle on a hand 8x8 case") {
    Rng rng(93);
    Tensor a = rand_uniform(rng, {3, 16, 16});
    CHECK(ssim(a, a) == Catch::Approx(1.0).margin(1e-9));

    // independent noise images decorrelate
    Tensor n1 = rand_uniform(rng, {3, 32, 32});
    Tensor n2 = rand_uniform(rng, {3, 32, 32});
    CHECK(ssim(n1, n2) < 0.2);

    // 8x8 case against the independent implementation
    Tensor x = rand_uniform(rng, {1, 8, 8});
    Tensor y = x;
    for (std::int64_t i = 0; i < y.numel(); ++i)
        y[i] = std::min(1.0f, std::max(0.0f, y[i] + float(rng.normal()) * 0.1f));
    CHECK(ssim(x, y) == Catch::Approx(ssim_scalar(x, y)).margin(1e-5));
    CHECK(ssim(y, x) == Catch::Approx(ssim(x, y)).margin(1e-9));
}
