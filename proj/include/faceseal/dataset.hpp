#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "faceseal/image_io.hpp"
#include "faceseal/random.hpp"
#include "faceseal/sbi.hpp"

namespace faceseal {

namespace fs = std::filesystem;

// Plain-text manifest:
//   # faceseal manifest v1
//   root=images
//   size=256
//   train img_00000.png
//   val   img_00001.png
//   ...
// `root` is resolved relative to the manifest location. A landmark sidecar
// `<image>.landmarks.txt` ("x y" per line) may sit next to each image.

struct DatasetManifest {
    fs::path manifest_path;
    fs::path root;
    int size = 0;
    std::vector<std::string> train, val, test;

    const std::vector<std::string>& split(const std::string& name) const {
        if (name == "train") return train;
        if (name == "val") return val;
        if (name == "test") return test;
        throw std::invalid_argument("unknown split: " + name);
    }

    fs::path image_path(const std::string& name) const { return root / name; }

    std::optional<Landmarks> landmarks_for(const std::string& name) const {
        fs::path p = root / (name + ".landmarks.txt");
        if (!fs::exists(p)) return std::nullopt;
        std::ifstream in(p);
        Landmarks lm;
        float x, y;
        while (in >> x >> y) lm.emplace_back(x, y);
        if (lm.empty()) return std::nullopt;
        return lm;
    }

    Tensor load_image(const std::string& name) const {
        Tensor t = imread_tensor(image_path(name).string());
        if (t.dim(1) % 2 || t.dim(2) % 2)
            throw std::runtime_error("manifest image has odd dimensions: " + name);
        return t;
    }

    void save(const fs::path& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write manifest: " + path.string());
        out << "# faceseal manifest v1\n";
        out << "root=" << fs::relative(root, path.parent_path()).generic_string() << "\n";
        out << "size=" << size << "\n";
        for (const auto& n : train) out << "train " << n << "\n";
        for (const auto& n : val) out << "val " << n << "\n";
        for (const auto& n : test) out << "test " << n << "\n";
    }

    static DatasetManifest load(const fs::path& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot read manifest: " + path.string());
        DatasetManifest m;
        m.manifest_path = fs::absolute(path);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            if (line.rfind("root=", 0) == 0) {
                fs::path r = line.substr(5);
                m.root = r.is_absolute() ? r : m.manifest_path.parent_path() / r;
            } else if (line.rfind("size=", 0) == 0) {
                m.size = std::stoi(line.substr(5));
            } else {
                std::istringstream ss(line);
                std::string split, name;
                ss >> split >> name;
                if (name.empty()) continue;
                if (split == "train") m.train.push_back(name);
                else if (split == "val") m.val.push_back(name);
                else if (split == "test") m.test.push_back(name);
                else throw std::runtime_error("bad manifest line: " + line);
            }
        }
        for (const auto* s : {&m.train, &m.val, &m.test})
            for (const auto& n : *s)
                if (!fs::exists(m.root / n))
                    throw std::runtime_error("manifest references missing file: " + n);
        return m;
    }
};

inline bool has_image_extension(const fs::path& p) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), ::tolower);
    return e == ".png" || e == ".jpg" || e == ".jpeg" || e == ".bmp" || e == ".ppm";
}

// Center-crop/resize every image under src_dir to size x size, write PNGs +
// transformed landmark sidecars into <manifest dir>/images/, split
// deterministically under the seed, and write the manifest.
inline DatasetManifest ingest(const fs::path& src_dir, const fs::path& out_manifest,
                              double train_ratio, double val_ratio, int size,
                              std::uint64_t seed) {
    if (size % 2) throw std::invalid_argument("ingest: size must be even");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(src_dir))
        if (e.is_regular_file() && has_image_extension(e.path())) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("ingest: no images in " + src_dir.string());

    Rng rng(seed);
    for (size_t i = files.size(); i > 1; --i) std::swap(files[i - 1], files[rng.below(i)]);

    const fs::path out_dir = out_manifest.parent_path().empty() ? fs::path(".")
                                                                : out_manifest.parent_path();
    const fs::path img_dir = out_dir / "images";
    fs::create_directories(img_dir);

    DatasetManifest m;
    m.manifest_path = fs::absolute(out_manifest);
    m.root = fs::absolute(img_dir);
    m.size = size;

    const size_t n_train = size_t(train_ratio * files.size());
    const size_t n_val = size_t(val_ratio * files.size());
    for (size_t i = 0; i < files.size(); ++i) {
        cv::Mat src = cv::imread(files[i].string(), cv::IMREAD_UNCHANGED);
        if (src.empty()) continue;
        int cx = 0, cy = 0;
        double scale = 1.0;
        Tensor t = ingest_image(src, size, &cx, &cy, &scale);
        char name[32];
        std::snprintf(name, sizeof(name), "img_%05zu.png", i);
        imwrite_tensor((img_dir / name).string(), t, 8);

        fs::path lm_src = files[i];
        lm_src += ".landmarks.txt";
        if (fs::exists(lm_src)) {
            std::ifstream in(lm_src);
            std::ofstream out((img_dir / (std::string(name) + ".landmarks.txt")));
            float x, y;
            while (in >> x >> y)
                out << (x - cx) * scale << " " << (y - cy) * scale << "\n";
        }

        if (i < n_train) m.train.push_back(name);
        else if (i < n_train + n_val) m.val.push_back(name);
        else m.test.push_back(name);
    }
    m.save(out_manifest);
    return m;
}

}  // namespace faceseal
