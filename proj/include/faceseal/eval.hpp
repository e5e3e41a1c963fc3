#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "faceseal/image_io.hpp"
#include "faceseal/metrics.hpp"
#include "faceseal/pipeline.hpp"

namespace faceseal {

// Benchmark harness: detection AUC per manipulation, steganographic quality,
// strength sweeps, the mask-localization property and the real-encoder
// transfer check.

struct QualityStats {
    double psnr_mean = 0.0;
    double ssim_mean = 0.0;
    bool lpips_available = false;  // pluggable external metric; absent here
    double lpips_mean = 0.0;
};

// Optional hook for a learned perceptual metric; the report marks it absent
// when no hook is installed.
using LpipsFn = std::function<double(const Tensor&, const Tensor&)>;

inline QualityStats steg_quality(const ModelState& m, const std::vector<Tensor>& hosts,
                                 const LpipsFn& lpips = nullptr) {
    QualityStats q;
    for (const auto& host : hosts) {
        Tensor x = protect_image(m, host);
        for (auto& v : x.data) v = std::min(1.0f, std::max(0.0f, v));
        q.psnr_mean += psnr(x, host);
        q.ssim_mean += ssim(x, host);
        if (lpips) q.lpips_mean += lpips(x, host);
    }
    const double n = double(hosts.size());
    q.psnr_mean /= n;
    q.ssim_mean /= n;
    if (lpips) {
        q.lpips_available = true;
        q.lpips_mean /= n;
    }
    return q;
}

inline double detection_auc(const ModelState& m, const std::vector<Tensor>& hosts,
                            const std::vector<std::optional<Landmarks>>& landmarks,
                            const ChannelPolicy& policy, std::uint64_t seed) {
    Rng rng(seed);
    ScoredSamples s = score_split(m, hosts, landmarks, policy, rng);
    return auc(s.scores, s.labels);
}

struct SweepPoint {
    double strength = 0.0;
    double auc = 0.5;
};

// AUC as a function of benign-manipulation strength; the op hits the real
// branch directly and the fake branch after the forgery.
inline std::vector<SweepPoint> robustness_sweep(const ModelState& m,
                                                const std::vector<Tensor>& hosts,
                                                const std::vector<std::optional<Landmarks>>& lms,
                                                ChannelKind kind,
                                                const std::vector<double>& strengths,
                                                std::uint64_t seed) {
    std::vector<SweepPoint> curve;
    for (double s : strengths) {
        ChannelPolicy policy;
        policy.fixed = ChannelOp{kind, s, Rng(seed).fork(std::uint64_t(s * 1000)).next_u64()};
        curve.push_back({s, detection_auc(m, hosts, lms, policy, seed)});
    }
    return curve;
}

// Fig.-4-style property: black out random rectangles of the steganographic
// image and measure how strongly the restored-template error concentrates in
// the corresponding region. Returns the mean inside/outside ratio of the
// per-pixel squared residual.
inline double mask_localization_ratio(const ModelState& m, const std::vector<Tensor>& hosts,
                                      double mask_fraction, std::uint64_t seed,
                                      float fill = 0.0f) {
    Rng rng(seed);
    const int size = m.cfg.image_size;
    double ratio_acc = 0.0;
    for (const auto& host : hosts) {
        Tensor x = protect_image(m, host);
        const double frac = std::sqrt(mask_fraction);
        const int mh = std::max(1, int(frac * size)), mw = std::max(1, int(frac * size));
        const int y0 = int(rng.below(std::uint64_t(size - mh)));
        const int x0 = int(rng.below(std::uint64_t(size - mw)));
        for (int c = 0; c < 3; ++c)
            for (int y = y0; y < y0 + mh; ++y)
                for (int xx = x0; xx < x0 + mw; ++xx) x.at3(c, y, xx) = fill;

        Tensor z = sample_latent(rng, 1, 3, size, size);
        z = Tensor({z.dim(1), z.dim(2), z.dim(3)}, std::move(z.data));
        Tensor restored = restore_tensors(m.steg, x, z);

        double in_sum = 0.0, out_sum = 0.0;
        std::int64_t in_cnt = 0, out_cnt = 0;
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < size; ++y)
                for (int xx = 0; xx < size; ++xx) {
                    const double d = double(m.tmpl.data.at3(c, y, xx)) - restored.at3(c, y, xx);
                    const bool inside = y >= y0 && y < y0 + mh && xx >= x0 && xx < x0 + mw;
                    if (inside) {
                        in_sum += d * d;
                        ++in_cnt;
                    } else {
                        out_sum += d * d;
                        ++out_cnt;
                    }
                }
        const double inside_energy = in_sum / double(in_cnt);
        const double outside_energy = out_sum / std::max<std::int64_t>(1, out_cnt);
        ratio_acc += inside_energy / std::max(1e-12, outside_energy);
    }
    return ratio_acc / double(hosts.size());
}

inline double verify_with_latent(const ModelState& m, const Tensor& transmitted, Rng& rng);

// Transfer check: the same split scored through genuine JPEG files instead
// of the differentiable approximation. SBI draws are re-seeded identically
// so the comparison is paired.
struct RealJpegResult {
    double auc_real_encoder = 0.5;
    double auc_differentiable = 0.5;
};

inline RealJpegResult real_file_roundtrip(const ModelState& m, const std::vector<Tensor>& hosts,
                                          const std::vector<std::optional<Landmarks>>& lms,
                                          int quality, std::uint64_t seed) {
    RealJpegResult out;
    ChannelPolicy diff_policy;
    diff_policy.fixed = ChannelOp{ChannelKind::jpeg, double(quality), 0};
    out.auc_differentiable = detection_auc(m, hosts, lms, diff_policy, seed);

    // real-encoder pass, same sbi stream structure as score_split
    Rng rng(seed);
    std::vector<double> scores;
    std::vector<int> labels;
    const int h = m.cfg.image_size;
    for (size_t i = 0; i < hosts.size(); ++i) {
        Tensor x = protect_image(m, hosts[i]);
        // real branch: export to an actual JPEG file and read it back
        scores.push_back(verify_with_latent(m, jpeg_real_roundtrip(x, quality), rng));
        labels.push_back(1);
        // fake branch: blend first, then the real encoder
        Graph g;
        Tensor x4({1, 3, h, h}, x.data);
        Var xv = g.constant(std::move(x4));
        Var src = source_transform(g, xv, rng, m.cfg.sbi);
        BlendMask bm = make_mask(h, h, i < lms.size() ? lms[i] : std::nullopt, rng, m.cfg.sbi);
        Var blended = blend(g, xv, src, bm);
        Tensor fake = g.val(blended);
        fake = Tensor({3, h, h}, std::move(fake.data));
        scores.push_back(verify_with_latent(m, jpeg_real_roundtrip(fake, quality), rng));
        labels.push_back(0);
    }
    out.auc_real_encoder = auc(scores, labels);
    return out;
}

inline double verify_with_latent(const ModelState& m, const Tensor& transmitted, Rng& rng) {
    Tensor z = sample_latent(rng, 1, 3, transmitted.dim(1), transmitted.dim(2));
    z = Tensor({z.dim(1), z.dim(2), z.dim(3)}, std::move(z.data));
    Tensor restored = restore_tensors(m.steg, transmitted, z);
    Tensor delta(restored.shape);
    for (std::int64_t i = 0; i < delta.numel(); ++i) delta[i] = m.tmpl.data[i] - restored[i];
    return discriminate_score(m.det, delta);
}

// --- report ---------------------------------------------------------------

struct BenchmarkReport {
    std::map<std::string, double> auc_by_manipulation;
    QualityStats quality;
    std::map<std::string, std::vector<SweepPoint>> sweeps;
    double mask_ratio = 0.0;
    RealJpegResult real_jpeg;
    std::string config_fingerprint;
};

inline BenchmarkReport run_benchmark(const ModelState& m, const std::vector<Tensor>& hosts,
                                     const std::vector<std::optional<Landmarks>>& lms,
                                     std::uint64_t seed, const LpipsFn& lpips = nullptr) {
    BenchmarkReport r;
    r.config_fingerprint = serialize(m.cfg);
    r.quality = steg_quality(m, hosts, lpips);

    ChannelPolicy mixed;
    mixed.ranges = m.cfg.channel;
    r.auc_by_manipulation["mixed"] = detection_auc(m, hosts, lms, mixed, seed);
    const std::pair<const char*, ChannelOp> fixed[] = {
        {"identity", {ChannelKind::identity, 0.0, 0}},
        {"jpeg_75", {ChannelKind::jpeg, 75.0, 0}},
        {"blur_1.5", {ChannelKind::blur, 1.5, 7}},
        {"noise_0.03", {ChannelKind::noise, 0.03, 7}},
        {"rescale_0.7", {ChannelKind::rescale, 0.7, 0}},
    };
    for (const auto& [name, op] : fixed) {
        ChannelPolicy p;
        p.fixed = op;
        r.auc_by_manipulation[name] = detection_auc(m, hosts, lms, p, seed);
    }
    r.sweeps["jpeg"] = robustness_sweep(m, hosts, lms, ChannelKind::jpeg,
                                        {50, 60, 70, 80, 90}, seed);
    r.sweeps["noise"] = robustness_sweep(m, hosts, lms, ChannelKind::noise,
                                         {0.01, 0.02, 0.03, 0.04, 0.05}, seed);
    r.sweeps["blur"] = robustness_sweep(m, hosts, lms, ChannelKind::blur,
                                        {1.0, 1.25, 1.5, 1.75, 2.0}, seed);
    r.sweeps["rescale"] = robustness_sweep(m, hosts, lms, ChannelKind::rescale,
                                           {0.5, 0.6, 0.7, 0.8, 0.9}, seed);
    r.mask_ratio = mask_localization_ratio(m, hosts, 0.15, seed);
    r.real_jpeg = real_file_roundtrip(m, hosts, lms, 75, seed);
    return r;
}

inline void write_report(const BenchmarkReport& r, const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    {
        std::ofstream csv(out_dir / "auc.csv");
        csv << "manipulation,auc\n";
        for (const auto& [k, v] : r.auc_by_manipulation) csv << k << "," << v << "\n";
    }
    for (const auto& [kind, curve] : r.sweeps) {
        std::ofstream csv(out_dir / ("sweep_" + kind + ".csv"));
        csv << "strength,auc\n";
        for (const auto& p : curve) csv << p.strength << "," << p.auc << "\n";
    }
    std::ofstream txt(out_dir / "summary.txt");
    txt << std::fixed << std::setprecision(4);
    txt << "faceseal benchmark report\n=========================\n\n";
    txt << "steganographic quality:\n";
    txt << "  psnr  " << r.quality.psnr_mean << " dB\n";
    txt << "  ssim  " << r.quality.ssim_mean << "\n";
    txt << "  lpips " << (r.quality.lpips_available ? std::to_string(r.quality.lpips_mean)
                                                    : std::string("n/a (no metric plugged in)"))
        << "\n\n";
    txt << "detection auc:\n";
    for (const auto& [k, v] : r.auc_by_manipulation) txt << "  " << k << ": " << v << "\n";
    txt << "\nmask localization energy ratio (15% area): " << r.mask_ratio << "\n";
    txt << "real-encoder jpeg-75 auc: " << r.real_jpeg.auc_real_encoder
        << " (differentiable proxy: " << r.real_jpeg.auc_differentiable << ")\n";
    txt << "\nconfig fingerprint:\n" << r.config_fingerprint;
}

}  // namespace faceseal
