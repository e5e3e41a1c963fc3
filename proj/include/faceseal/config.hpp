#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "faceseal/channel.hpp"
#include "faceseal/sbi.hpp"

namespace faceseal {

// Run configuration, serialized as plain key=value lines ('#' comments).
// The canonical serialization doubles as the checkpoint config fingerprint.
struct TrainConfig {
    int image_size = 256;
    int batch_size = 4;
    int steps = 2000;
    std::uint64_t seed = 1;

    // loss weights and learning rates
    double lambda1 = 2.0;   // steganography
    double lambda2 = 0.3;   // template LL anchoring
    double lambda3 = 1.0;   // restoration fidelity
    double lambda4 = 8.0;   // detection
    double lr_steg = std::pow(10.0, -4.5);
    double lr_det = 0.001;
    double lr_template = 0.0001;

    int subnet_growth = 32;
    int detector_width = 64;
    double alpha_clamp = 2.0;
    double grad_clip = 5.0;

    int val_interval = 200;
    int val_images = 24;
    double val_jpeg_qf = 75.0;

    int export_bits = 16;

    ChannelRanges channel;
    SbiConfig sbi;
};

namespace configdetail {

struct FieldMap {
    std::map<std::string, std::function<void(TrainConfig&, const std::string&)>> setters;
    std::map<std::string, std::function<std::string(const TrainConfig&)>> getters;

    template <class T>
    void add(const std::string& key, T TrainConfig::* member) {
        setters[key] = [member](TrainConfig& c, const std::string& v) {
            std::istringstream ss(v);
            ss >> (c.*member);
            if (ss.fail()) throw std::invalid_argument("bad value for " + std::string(v));
        };
        getters[key] = [member](const TrainConfig& c) {
            std::ostringstream ss;
            ss.precision(17);
            ss << (c.*member);
            return ss.str();
        };
    }
    template <class Sub, class T>
    void add(const std::string& key, Sub TrainConfig::* sub, T Sub::* member) {
        setters[key] = [sub, member](TrainConfig& c, const std::string& v) {
            if constexpr (std::is_same_v<T, bool>) {
                if (v != "true" && v != "false")
                    throw std::invalid_argument("bad bool: " + v);
                (c.*sub).*member = (v == "true");
            } else {
                std::istringstream ss(v);
                ss >> ((c.*sub).*member);
                if (ss.fail()) throw std::invalid_argument("bad value: " + v);
            }
        };
        getters[key] = [sub, member](const TrainConfig& c) {
            if constexpr (std::is_same_v<T, bool>) {
                return std::string((c.*sub).*member ? "true" : "false");
            } else {
                std::ostringstream ss;
                ss.precision(17);
                ss << ((c.*sub).*member);
                return ss.str();
            }
        };
    }
};

inline const FieldMap& fields() {
    static const FieldMap m = [] {
        FieldMap f;
        f.add("image_size", &TrainConfig::image_size);
        f.add("batch_size", &TrainConfig::batch_size);
        f.add("steps", &TrainConfig::steps);
        f.add("seed", &TrainConfig::seed);
        f.add("lambda1", &TrainConfig::lambda1);
        f.add("lambda2", &TrainConfig::lambda2);
        f.add("lambda3", &TrainConfig::lambda3);
        f.add("lambda4", &TrainConfig::lambda4);
        f.add("lr_steg", &TrainConfig::lr_steg);
        f.add("lr_det", &TrainConfig::lr_det);
        f.add("lr_template", &TrainConfig::lr_template);
        f.add("subnet_growth", &TrainConfig::subnet_growth);
        f.add("detector_width", &TrainConfig::detector_width);
        f.add("alpha_clamp", &TrainConfig::alpha_clamp);
        f.add("grad_clip", &TrainConfig::grad_clip);
        f.add("val_interval", &TrainConfig::val_interval);
        f.add("val_images", &TrainConfig::val_images);
        f.add("val_jpeg_qf", &TrainConfig::val_jpeg_qf);
        f.add("export_bits", &TrainConfig::export_bits);
        f.add("channel.identity", &TrainConfig::channel, &ChannelRanges::identity);
        f.add("channel.jpeg", &TrainConfig::channel, &ChannelRanges::jpeg);
        f.add("channel.jpeg.min", &TrainConfig::channel, &ChannelRanges::jpeg_min);
        f.add("channel.jpeg.max", &TrainConfig::channel, &ChannelRanges::jpeg_max);
        f.add("channel.blur", &TrainConfig::channel, &ChannelRanges::blur);
        f.add("channel.blur.min", &TrainConfig::channel, &ChannelRanges::blur_min);
        f.add("channel.blur.max", &TrainConfig::channel, &ChannelRanges::blur_max);
        f.add("channel.noise", &TrainConfig::channel, &ChannelRanges::noise);
        f.add("channel.noise.min", &TrainConfig::channel, &ChannelRanges::noise_min);
        f.add("channel.noise.max", &TrainConfig::channel, &ChannelRanges::noise_max);
        f.add("channel.rescale", &TrainConfig::channel, &ChannelRanges::rescale);
        f.add("channel.rescale.min", &TrainConfig::channel, &ChannelRanges::rescale_min);
        f.add("channel.rescale.max", &TrainConfig::channel, &ChannelRanges::rescale_max);
        f.add("sbi.color_jitter", &TrainConfig::sbi, &SbiConfig::color_jitter);
        f.add("sbi.sharpen", &TrainConfig::sbi, &SbiConfig::sharpen);
        f.add("sbi.translate", &TrainConfig::sbi, &SbiConfig::translate);
        f.add("sbi.resample", &TrainConfig::sbi, &SbiConfig::resample);
        f.add("sbi.jitter_mag", &TrainConfig::sbi, &SbiConfig::jitter_mag);
        f.add("sbi.sharpen_max", &TrainConfig::sbi, &SbiConfig::sharpen_max);
        f.add("sbi.translate_max", &TrainConfig::sbi, &SbiConfig::translate_max);
        f.add("sbi.resample_min", &TrainConfig::sbi, &SbiConfig::resample_min);
        f.add("sbi.mask_area_min", &TrainConfig::sbi, &SbiConfig::mask_area_min);
        f.add("sbi.mask_area_max", &TrainConfig::sbi, &SbiConfig::mask_area_max);
        f.add("sbi.feather_sigma", &TrainConfig::sbi, &SbiConfig::feather_sigma);
        return f;
    }();
    return m;
}

}  // namespace configdetail

inline void apply_config_line(TrainConfig& cfg, const std::string& key,
                              const std::string& value) {
    const auto& f = configdetail::fields();
    auto it = f.setters.find(key);
    if (it == f.setters.end()) throw std::invalid_argument("unknown config key: " + key);
    it->second(cfg, value);
}

inline TrainConfig parse_config(std::istream& in) {
    TrainConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key=value");
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        apply_config_line(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    if (cfg.lambda1 <= 0 || cfg.lambda2 < 0 || cfg.lambda3 <= 0 || cfg.lambda4 <= 0)
        throw std::invalid_argument("config: loss weights must be positive (lambda2 may be 0 "
                                    "only for ablation runs)");
    if (cfg.batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
    if (cfg.image_size % 2) throw std::invalid_argument("config: image_size must be even");
    return cfg;
}

inline TrainConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config: " + path);
    return parse_config(in);
}

// Canonical serialization; also the checkpoint's config fingerprint.
inline std::string serialize(const TrainConfig& cfg) {
    std::ostringstream out;
    for (const auto& [key, get] : configdetail::fields().getters)
        out << key << "=" << get(cfg) << "\n";
    return out.str();
}

}  // namespace faceseal
