#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "faceseal/imgproc.hpp"
#include "faceseal/tensor.hpp"

namespace faceseal {

// Area under the ROC curve via the Mann-Whitney rank statistic, ties
// averaged. Labels: 1 = positive (real), 0 = negative (fake).
inline double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw std::invalid_argument("auc: size mismatch");
    const size_t n = scores.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });
    std::vector<double> rank(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg = 0.5 * (double(i) + double(j)) + 1.0;  // 1-based
        for (size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        i = j + 1;
    }
    double rank_pos = 0.0;
    std::int64_t npos = 0, nneg = 0;
    for (size_t k = 0; k < n; ++k) {
        if (labels[k] == 1) {
            rank_pos += rank[k];
            ++npos;
        } else {
            ++nneg;
        }
    }
    if (npos == 0 || nneg == 0) return 0.5;
    const double u = rank_pos - double(npos) * (npos + 1) / 2.0;
    return u / (double(npos) * nneg);
}

// PSNR in dB for unit peak; identical images report the 100 dB cap.
inline double psnr(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("psnr: shape mismatch");
    double mse = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        const double d = double(a[i]) - b[i];
        mse += d * d;
    }
    mse /= double(a.numel());
    if (mse <= 0.0) return 100.0;
    return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

// Windowed SSIM: 11x11 Gaussian (sigma 1.5), C1=(0.01)^2, C2=(0.03)^2 on unit
// range, reflect-padded local statistics, mean over all pixels and channels.
inline double ssim(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("ssim: shape mismatch");
    if (a.ndim() != 3) throw std::invalid_argument("ssim: want (C,H,W)");
    constexpr double kC1 = 0.01 * 0.01, kC2 = 0.03 * 0.03;
    const double sigma = 1.5;
    const int radius = 5;

    Tensor a2(a.shape), b2(a.shape), ab(a.shape);
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        a2[i] = a[i] * a[i];
        b2[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    Tensor mu_a = gaussian_blur_plain(a, sigma, radius);
    Tensor mu_b = gaussian_blur_plain(b, sigma, radius);
    Tensor m_a2 = gaussian_blur_plain(a2, sigma, radius);
    Tensor m_b2 = gaussian_blur_plain(b2, sigma, radius);
    Tensor m_ab = gaussian_blur_plain(ab, sigma, radius);

    double acc = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        const double ma = mu_a[i], mb = mu_b[i];
        const double va = double(m_a2[i]) - ma * ma;
        const double vb = double(m_b2[i]) - mb * mb;
        const double cab = double(m_ab[i]) - ma * mb;
        acc += ((2 * ma * mb + kC1) * (2 * cab + kC2)) /
               ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
    }
    return acc / double(a.numel());
}

}  // namespace faceseal
