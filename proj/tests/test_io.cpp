#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "faceseal/config.hpp"
#include "faceseal/dataset.hpp"
#include "faceseal/synth.hpp"
#include "testutil.hpp"

using namespace faceseal;
namespace fs = std::filesystem;

namespace {
struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("faceseal_io_" + std::to_string(Rng(std::random_device{}()).next_u64() % 100000));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};
}  // namespace

TEST_CASE("image write/read round trip at 8 and 16 bits") {
    TempDir tmp;
    Rng rng(121);
    Tensor img = rand_uniform(rng, {3, 16, 16});

    imwrite_tensor((tmp.path / "a8.png").string(), img, 8);
    Tensor back8 = imread_tensor((tmp.path / "a8.png").string());
    CHECK(max_abs_diff(back8, img) <= 0.5 / 255.0 + 1e-6);

    imwrite_tensor((tmp.path / "a16.png").string(), img, 16);
    Tensor back16 = imread_tensor((tmp.path / "a16.png").string());
    CHECK(max_abs_diff(back16, img) <= 0.5 / 65535.0 + 1e-7);

    CHECK_THROWS_AS(imwrite_tensor((tmp.path / "x.png").string(), img, 12),
                    std::invalid_argument);
    CHECK_THROWS_AS(imread_tensor((tmp.path / "missing.png").string()), std::runtime_error);
}

TEST_CASE("real jpeg round trip decodes to a nearby image") {
    Rng rng(122);
    Tensor img = gaussian_blur_plain(rand_uniform(rng, {3, 32, 32}), 2.0);
    Tensor back = jpeg_real_roundtrip(img, 90);
    CHECK(back.shape == img.shape);
    CHECK(mean_abs_diff(back, img) < 0.05);
}

TEST_CASE("checkpoint: tensors and meta survive a round trip") {
    TempDir tmp;
    Checkpoint c;
    Rng rng(123);
    c.tensors["a"] = randn(rng, {2, 3, 4});
    c.tensors["b"] = Tensor::scalar(7.0f);
    c.meta["meta/config"] = "x=1\ny=2\n";
    const fs::path p = tmp.path / "t.ckpt";
    c.save(p);

    Checkpoint l = Checkpoint::load(p);
    CHECK(max_abs_diff(l.tensor("a"), c.tensors["a"]) == 0.0);
    CHECK(l.tensor("b")[0] == 7.0f);
    CHECK(l.meta_or("meta/config", "") == "x=1\ny=2\n");
    CHECK_THROWS_AS(l.tensor("missing"), std::runtime_error);

    // corrupt magic is rejected
    std::ofstream bad(tmp.path / "bad.ckpt", std::ios::binary);
    bad << "NOTACKPT garbage";
    bad.close();
    CHECK_THROWS_AS(Checkpoint::load(tmp.path / "bad.ckpt"), std::runtime_error);
}

TEST_CASE("config: parse, defaults, serialize round trip, errors") {
    std::istringstream in(
        "# comment\n"
        "image_size = 64\n"
        "lambda2=0.0\n"
        "channel.jpeg.min=55\n"
        "sbi.translate=false\n");
    TrainConfig cfg = parse_config(in);
    CHECK(cfg.image_size == 64);
    CHECK(cfg.lambda2 == 0.0);
    CHECK(cfg.channel.jpeg_min == 55.0);
    CHECK_FALSE(cfg.sbi.translate);
    // untouched defaults carry the paper values
    CHECK(cfg.lambda1 == 2.0);
    CHECK(cfg.lambda4 == 8.0);
    CHECK(cfg.lr_steg == Catch::Approx(std::pow(10.0, -4.5)));
    CHECK(cfg.batch_size == 4);

    std::istringstream again(serialize(cfg));
    TrainConfig cfg2 = parse_config(again);
    CHECK(serialize(cfg2) == serialize(cfg));

    std::istringstream bad1("no_such_key=3\n");
    CHECK_THROWS_AS(parse_config(bad1), std::invalid_argument);
    std::istringstream bad2("image_size 64\n");
    CHECK_THROWS_AS(parse_config(bad2), std::invalid_argument);
    std::istringstream bad3("batch_size=0\n");
    CHECK_THROWS_AS(parse_config(bad3), std::invalid_argument);
    std::istringstream bad4("image_size=63\n");
    CHECK_THROWS_AS(parse_config(bad4), std::invalid_argument);
}

TEST_CASE("ingest: crops, resizes, splits deterministically, moves landmarks") {
    TempDir tmp;
    const fs::path src = tmp.path / "src";
    fs::create_directories(src);
    Rng rng(124);
    for (int i = 0; i < 10; ++i) {
        SynthFace f = make_face(rng, 96);
        char name[32];
        std::snprintf(name, sizeof(name), "f%03d.png", i);
        imwrite_tensor((src / name).string(), f.image, 8);
        std::ofstream lm(src / (std::string(name) + ".landmarks.txt"));
        for (auto [x, y] : f.landmarks) lm << x << " " << y << "\n";
    }

    const fs::path man_path = tmp.path / "out" / "manifest.txt";
    fs::create_directories(man_path.parent_path());
    DatasetManifest m = ingest(src, man_path, 0.6, 0.2, 32, 9);
    CHECK(m.train.size() == 6);
    CHECK(m.val.size() == 2);
    CHECK(m.test.size() == 2);
    CHECK(m.size == 32);

    DatasetManifest loaded = DatasetManifest::load(man_path);
    CHECK(loaded.train == m.train);
    Tensor img = loaded.load_image(loaded.train[0]);
    CHECK(img.shape == std::vector<int>{3, 32, 32});

    auto lm = loaded.landmarks_for(loaded.train[0]);
    REQUIRE(lm.has_value());
    // source is 96px square, so coordinates scale by 1/3 with no crop offset
    for (auto [x, y] : *lm) {
        CHECK(x >= -16.0f);
        CHECK(x <= 48.0f);  // head-ellipse points may exceed the frame slightly
        CHECK(y >= -16.0f);
        CHECK(y <= 48.0f);
    }

    // identical seed reproduces the same split
    const fs::path man2 = tmp.path / "out2" / "manifest.txt";
    fs::create_directories(man2.parent_path());
    DatasetManifest m2 = ingest(src, man2, 0.6, 0.2, 32, 9);
    CHECK(m2.train == m.train);
    CHECK(m2.test == m.test);

    // a manifest referencing a missing file is rejected
    std::ofstream broken(tmp.path / "broken.txt");
    broken << "root=out/images\nsize=32\ntrain nope.png\n";
    broken.close();
    CHECK_THROWS_AS(DatasetManifest::load(tmp.path / "broken.txt"), std::runtime_error);
}

TEST_CASE("synthetic faces are valid corpus images") {
    Rng rng(125);
    SynthFace f = make_face(rng, 64);
    CHECK(f.image.shape == std::vector<int>{3, 64, 64});
    for (float v : f.image.data) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
    CHECK(f.landmarks.size() >= 8);
    // faces differ across draws
    SynthFace f2 = make_face(rng, 64);
    CHECK(mean_abs_diff(f.image, f2.image) > 0.01);
}
