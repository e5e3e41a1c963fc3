// faceseal command line: ingest / synth / train / protect / verify / eval / sweep

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "faceseal/dataset.hpp"
#include "faceseal/eval.hpp"
#include "faceseal/synth.hpp"
#include "faceseal/trainer.hpp"

namespace fs = std::filesystem;
using namespace faceseal;

namespace {

struct SplitData {
    std::vector<Tensor> images;
    std::vector<std::optional<Landmarks>> landmarks;
};

SplitData load_split(const DatasetManifest& m, const std::string& split, int limit = 0) {
    SplitData d;
    const auto& names = m.split(split);
    const size_t n = limit > 0 ? std::min(names.size(), size_t(limit)) : names.size();
    for (size_t i = 0; i < n; ++i) {
        d.images.push_back(m.load_image(names[i]));
        d.landmarks.push_back(m.landmarks_for(names[i]));
    }
    return d;
}

ModelState load_model(const std::string& checkpoint) {
    return unpack_model(Checkpoint::load(checkpoint));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"faceseal: proactive deepfake detection via an invertibly hidden face template"};
    app.require_subcommand(1);

    // --- ingest ---
    auto* ingest_cmd = app.add_subcommand("ingest", "crop/resize a directory of images into a manifest");
    std::string src_dir, out_manifest;
    double train_ratio = 0.8, val_ratio = 0.1;
    int ingest_size = 256;
    std::uint64_t ingest_seed = 1;
    ingest_cmd->add_option("--src", src_dir, "source image directory")->required();
    ingest_cmd->add_option("--out", out_manifest, "output manifest path")->required();
    ingest_cmd->add_option("--size", ingest_size, "target square size (default 256)");
    ingest_cmd->add_option("--train-ratio", train_ratio);
    ingest_cmd->add_option("--val-ratio", val_ratio);
    ingest_cmd->add_option("--seed", ingest_seed, "split shuffle seed");

    // --- synth ---
    auto* synth_cmd = app.add_subcommand("synth", "generate a procedural face corpus");
    std::string synth_out;
    int synth_count = 200, synth_size = 256;
    std::uint64_t synth_seed = 7;
    synth_cmd->add_option("--out", synth_out, "output directory")->required();
    synth_cmd->add_option("--count", synth_count);
    synth_cmd->add_option("--size", synth_size);
    synth_cmd->add_option("--seed", synth_seed);

    // --- train ---
    auto* train_cmd = app.add_subcommand("train", "train network, detector and template jointly");
    std::string config_path, manifest_path, ckpt_out, log_csv;
    std::uint64_t seed_override = 0;
    train_cmd->add_option("--config", config_path, "key=value config file");
    train_cmd->add_option("--manifest", manifest_path, "dataset manifest")->required();
    train_cmd->add_option("--out", ckpt_out, "checkpoint output path")->required();
    train_cmd->add_option("--log", log_csv, "training log CSV");
    auto* seed_opt = train_cmd->add_option("--seed", seed_override, "overrides config seed");

    // --- protect ---
    auto* protect_cmd = app.add_subcommand("protect", "embed the template into a host image");
    std::string p_ckpt, p_in, p_out;
    int p_bits = 0;
    protect_cmd->add_option("--checkpoint", p_ckpt)->required();
    protect_cmd->add_option("--in", p_in, "host image")->required();
    protect_cmd->add_option("--out", p_out, "steganographic image (png)")->required();
    protect_cmd->add_option("--bits", p_bits, "8 or 16 (default from config)");

    // --- verify ---
    auto* verify_cmd = app.add_subcommand("verify", "score a transmitted image (exit 0 real, 1 fake, 2 error)");
    std::string v_ckpt, v_in;
    std::uint64_t v_seed = kVerifyLatentSeed;
    bool v_stochastic = false;
    double v_threshold = -1.0;
    verify_cmd->add_option("--checkpoint", v_ckpt)->required();
    verify_cmd->add_option("--in", v_in)->required();
    verify_cmd->add_option("--seed", v_seed, "latent seed (default fixed for reproducibility)");
    verify_cmd->add_flag("--stochastic", v_stochastic, "average over 8 latent draws");
    verify_cmd->add_option("--threshold", v_threshold, "override the calibrated threshold");

    // --- eval ---
    auto* eval_cmd = app.add_subcommand("eval", "run the benchmark suite on a manifest split");
    std::string e_ckpt, e_manifest, e_outdir, e_split = "test";
    int e_limit = 0;
    std::uint64_t e_seed = 1;
    eval_cmd->add_option("--checkpoint", e_ckpt)->required();
    eval_cmd->add_option("--manifest", e_manifest)->required();
    eval_cmd->add_option("--out-dir", e_outdir)->required();
    eval_cmd->add_option("--split", e_split, "train/val/test (default test)");
    eval_cmd->add_option("--limit", e_limit, "cap number of images");
    eval_cmd->add_option("--seed", e_seed);

    // --- sweep ---
    auto* sweep_cmd = app.add_subcommand("sweep", "AUC vs strength for one manipulation");
    std::string s_ckpt, s_manifest, s_kind, s_out, s_split = "test";
    std::vector<double> s_strengths;
    int s_limit = 0;
    std::uint64_t s_seed = 1;
    sweep_cmd->add_option("--checkpoint", s_ckpt)->required();
    sweep_cmd->add_option("--manifest", s_manifest)->required();
    sweep_cmd->add_option("--kind", s_kind, "jpeg|blur|noise|rescale")->required();
    sweep_cmd->add_option("--strengths", s_strengths, "comma-separated strengths")
        ->required()
        ->delimiter(',');
    sweep_cmd->add_option("--out", s_out, "output CSV")->required();
    sweep_cmd->add_option("--split", s_split);
    sweep_cmd->add_option("--limit", s_limit);
    sweep_cmd->add_option("--seed", s_seed);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest_cmd) {
            DatasetManifest m =
                ingest(src_dir, out_manifest, train_ratio, val_ratio, ingest_size, ingest_seed);
            std::cout << "ingested " << (m.train.size() + m.val.size() + m.test.size())
                      << " images (" << m.train.size() << " train / " << m.val.size()
                      << " val / " << m.test.size() << " test) at " << m.size << "x" << m.size
                      << "\n";
        } else if (*synth_cmd) {
            fs::create_directories(synth_out);
            Rng rng(synth_seed);
            for (int i = 0; i < synth_count; ++i) {
                SynthFace f = make_face(rng, synth_size);
                char name[32];
                std::snprintf(name, sizeof(name), "face_%05d.png", i);
                imwrite_tensor((fs::path(synth_out) / name).string(), f.image, 8);
                std::ofstream lm(fs::path(synth_out) / (std::string(name) + ".landmarks.txt"));
                for (auto [x, y] : f.landmarks) lm << x << " " << y << "\n";
            }
            std::cout << "wrote " << synth_count << " synthetic faces to " << synth_out << "\n";
        } else if (*train_cmd) {
            TrainConfig cfg = config_path.empty() ? TrainConfig{} : load_config_file(config_path);
            if (seed_opt->count()) cfg.seed = seed_override;
            DatasetManifest m = DatasetManifest::load(manifest_path);
            if (m.size && m.size != cfg.image_size) {
                std::cerr << "note: manifest size " << m.size << " overrides config image_size\n";
                cfg.image_size = m.size;
            }
            SplitData tr = load_split(m, "train");
            SplitData va = load_split(m, "val", cfg.val_images);
            TrainerState st = TrainerState::init(cfg);
            TrainResult res =
                train(st, tr.images, tr.landmarks, va.images, va.landmarks, ckpt_out, log_csv,
                      [](const TrainLogRow& row) {
                          if (row.step % 50 == 0 || row.val_auc) {
                              std::cout << "step " << row.step << "  steg " << row.stats.loss_steg
                                        << "  sec " << row.stats.loss_sec << "  rec "
                                        << row.stats.loss_rec << "  det " << row.stats.loss_det;
                              if (row.val_auc) std::cout << "  val_auc " << *row.val_auc;
                              std::cout << "\n";
                          }
                      });
            if (res.aborted) {
                std::cerr << "training aborted: " << res.abort_reason << "\n";
                return 2;
            }
            std::cout << "done. best validation AUC " << res.best_val_auc << ", checkpoint at "
                      << ckpt_out << "\n";
        } else if (*protect_cmd) {
            ModelState model = load_model(p_ckpt);
            Tensor host = imread_tensor(p_in);
            if (host.dim(1) != model.cfg.image_size || host.dim(2) != model.cfg.image_size) {
                cv::Mat m = cv::imread(p_in, cv::IMREAD_UNCHANGED);
                host = ingest_image(m, model.cfg.image_size);
            }
            Tensor x = protect_image(model, host);
            const int bits = p_bits ? p_bits : model.cfg.export_bits;
            imwrite_tensor(p_out, x, bits);
            for (auto& v : x.data) v = std::min(1.0f, std::max(0.0f, v));
            std::cout << "protected: psnr " << psnr(x, host) << " dB -> " << p_out << "\n";
        } else if (*verify_cmd) {
            ModelState model = load_model(v_ckpt);
            Tensor img = imread_tensor(v_in);
            if (img.dim(1) != model.cfg.image_size || img.dim(2) != model.cfg.image_size) {
                cv::Mat m = cv::imread(v_in, cv::IMREAD_UNCHANGED);
                img = ingest_image(m, model.cfg.image_size);
            }
            DetectionScore s = verify_image(model, img, v_seed, v_stochastic ? 8 : 1);
            if (v_threshold >= 0.0) s.threshold = v_threshold;
            std::cout << "prob_real " << s.prob_real << "  threshold " << s.threshold << "  -> "
                      << (s.is_real() ? "REAL" : "FAKE") << "\n";
            return s.is_real() ? 0 : 1;
        } else if (*eval_cmd) {
            ModelState model = load_model(e_ckpt);
            DatasetManifest m = DatasetManifest::load(e_manifest);
            SplitData d = load_split(m, e_split, e_limit);
            BenchmarkReport r = run_benchmark(model, d.images, d.landmarks, e_seed);
            write_report(r, e_outdir);
            std::cout << "report written to " << e_outdir << " (mixed-channel AUC "
                      << r.auc_by_manipulation.at("mixed") << ", psnr " << r.quality.psnr_mean
                      << " dB)\n";
        } else if (*sweep_cmd) {
            ModelState model = load_model(s_ckpt);
            DatasetManifest m = DatasetManifest::load(s_manifest);
            SplitData d = load_split(m, s_split, s_limit);
            auto curve = robustness_sweep(model, d.images, d.landmarks,
                                          channel_kind_from(s_kind), s_strengths, s_seed);
            std::ofstream csv(s_out);
            csv << "strength,auc\n";
            for (const auto& p : curve) csv << p.strength << "," << p.auc << "\n";
            std::cout << "sweep written to " << s_out << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
