#include <catch2/catch_amalgamated.hpp>

#include "faceseal/synth.hpp"
#include "faceseal/trainer.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace faceseal;

namespace {
TrainConfig toy_config(int size = 32) {
    TrainConfig cfg;
    cfg.image_size = size;
    cfg.batch_size = 4;
    cfg.subnet_growth = 4;
    cfg.detector_width = 4;
    cfg.seed = 7;
    return cfg;
}

std::vector<Tensor> toy_faces(int n, int size, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Tensor> out;
    for (int i = 0; i < n; ++i) out.push_back(make_face(rng, size).image);
    return out;
}
}  // namespace

TEST_CASE("build_batch: 2N samples, N of each label, real ops recorded") {
    TrainConfig cfg = toy_config();
    ModelState m = ModelState::init(cfg);
    Rng rng(101);
    Tensor hosts = rand_uniform(rng, {4, 3, 32, 32});

    Graph g;
    auto net = bind(g, m.steg, false);
    Var s = g.constant(m.tmpl.batch_view());
    Rng brng(102);
    LabeledBatch b = build_batch(g, g.constant(hosts), s, net, brng, cfg.channel, cfg.sbi);

    CHECK(g.val(b.transmitted).dim(0) == 8);
    REQUIRE(b.labels.size() == 8);
    int pos = 0, neg = 0;
    for (float y : b.labels) (y == 1.0f ? pos : neg)++;
    CHECK(pos == 4);
    CHECK(neg == 4);
    CHECK(b.real_ops.size() == 4);
}

TEST_CASE("build_batch: deterministic under seed") {
    TrainConfig cfg = toy_config();
    ModelState m = ModelState::init(cfg);
    Rng rng(103);
    Tensor hosts = rand_uniform(rng, {2, 3, 32, 32});

    auto run = [&](std::uint64_t seed) {
        Graph g;
        auto net = bind(g, m.steg, false);
        Var s = g.constant(m.tmpl.batch_view());
        Rng brng(seed);
        LabeledBatch b = build_batch(g, g.constant(hosts), s, net, brng, cfg.channel, cfg.sbi);
        return g.val(b.transmitted);
    };
    CHECK(max_abs_diff(run(5), run(5)) == 0.0);
}

TEST_CASE("build_batch: identity op passes X through bit-exactly") {
    TrainConfig cfg = toy_config();
    cfg.channel.jpeg = cfg.channel.blur = cfg.channel.noise = cfg.channel.rescale = false;
    ModelState m = ModelState::init(cfg);
    Rng rng(104);
    Tensor hosts = rand_uniform(rng, {2, 3, 32, 32});

    Graph g;
    auto net = bind(g, m.steg, false);
    Var s = g.constant(m.tmpl.batch_view());
    Rng brng(105);
    LabeledBatch b = build_batch(g, g.constant(hosts), s, net, brng, cfg.channel, cfg.sbi);
    for (const auto& op : b.real_ops) CHECK(op.kind == ChannelKind::identity);
    const Tensor& x = g.val(b.x);
    const Tensor& t = g.val(b.transmitted);
    for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(t[i] == x[i]);
}

TEST_CASE("loss_steg: trivials and the scalar oracle") {
    Rng rng(106);
    Tensor host = rand_uniform(rng, {3, 3, 8, 8});
    Graph g;
    Var h = g.constant(host);
    CHECK(g.val(loss_steg(g, h, h))[0] == 0.0f);

    // constant offset c -> c * sqrt(per-image numel)
    Tensor x = host;
    for (auto& v : x.data) v += 0.125f;
    Var l = loss_steg(g, h, g.constant(x));
    CHECK(g.val(l)[0] == Catch::Approx(0.125 * std::sqrt(3.0 * 8 * 8)).epsilon(1e-4));

    // permutation invariance over the batch
    Tensor xp({3, 3, 8, 8});
    const std::int64_t per = 3 * 8 * 8;
    for (int i = 0; i < 3; ++i)
        std::copy_n(x.data.begin() + ((i + 1) % 3) * per, per, xp.data.begin() + i * per);
    Tensor hp({3, 3, 8, 8});
    for (int i = 0; i < 3; ++i)
        std::copy_n(host.data.begin() + ((i + 1) % 3) * per, per, hp.data.begin() + i * per);
    Var l2 = loss_steg(g, g.constant(hp), g.constant(xp));
    CHECK(g.val(l2)[0] == Catch::Approx(double(g.val(l)[0])).margin(1e-6));
}

TEST_CASE("total_loss: paper weights give 11.3 on unit components") {
    TrainConfig cfg;  // lambda defaults 2.0, 0.3, 1.0, 8.0
    Graph g;
    Var one = g.constant(Tensor::scalar(1.0f));
    Var total = total_loss(g, cfg, one, one, one, one);
    CHECK(g.val(total)[0] == Catch::Approx(11.3).margin(1e-6));

    Var zero = g.constant(Tensor::scalar(0.0f));
    CHECK(g.val(total_loss(g, cfg, zero, zero, zero, zero))[0] == 0.0f);

    // linear in each component
    Var two = g.constant(Tensor::scalar(2.0f));
    CHECK(g.val(total_loss(g, cfg, two, zero, zero, zero))[0] ==
          Catch::Approx(2.0 * cfg.lambda1));
    CHECK(g.val(total_loss(g, cfg, zero, zero, zero, two))[0] ==
          Catch::Approx(2.0 * cfg.lambda4));
}

TEST_CASE("train_step: finite losses, template stays in [0,1], params move") {
    TrainConfig cfg = toy_config();
    TrainerState st = TrainerState::init(cfg);
    auto faces = toy_faces(4, 32, 107);
    Tensor batch({4, 3, 32, 32});
    for (int i = 0; i < 4; ++i)
        std::copy(faces[i].data.begin(), faces[i].data.end(),
                  batch.data.begin() + std::int64_t(i) * 3 * 32 * 32);

    Tensor w_before = st.model.det.convs[0].w;
    StepStats s1 = train_step(st, batch);
    CHECK(s1.ok);
    CHECK(std::isfinite(s1.total));
    CHECK(st.step == 1);
    CHECK(max_abs_diff(w_before, st.model.det.convs[0].w) > 0.0);
    for (float v : st.model.tmpl.data.data) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
    StepStats s2 = train_step(st, batch);
    CHECK(s2.ok);
}

TEST_CASE("train_step: non-finite loss aborts without an update") {
    TrainConfig cfg = toy_config();
    TrainerState st = TrainerState::init(cfg);
    // poison one steg weight; the steg loss shows it first
    st.model.steg.blocks[0].phi.convs[0].w[0] = std::numeric_limits<float>::infinity();
    Rng rng(108);
    Tensor batch = rand_uniform(rng, {4, 3, 32, 32});
    Tensor tmpl_before = st.model.tmpl.data;
    StepStats s;
    try {
        s = train_step(st, batch);
    } catch (const std::domain_error&) {
        s.ok = false;  // non-finite may be caught at the network boundary instead
        s.diverged = "steg";
    }
    CHECK_FALSE(s.ok);
    CHECK_FALSE(s.diverged.empty());
    CHECK(st.step == 0);
    CHECK(max_abs_diff(tmpl_before, st.model.tmpl.data) == 0.0);
}

TEST_CASE("determinism: two identical seeded runs produce the same trajectory") {
    auto run = [&]() {
        TrainConfig cfg = toy_config();
        cfg.steps = 12;
        TrainerState st = TrainerState::init(cfg);
        auto faces = toy_faces(8, 32, 109);
        std::vector<std::optional<Landmarks>> lms(faces.size());
        std::vector<double> totals;
        TrainResult r = train(st, faces, lms, {}, {}, "", "",
                              [&](const TrainLogRow& row) { totals.push_back(row.stats.total); });
        REQUIRE_FALSE(r.aborted);
        return totals;
    };
    auto a = run();
    auto b = run();
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i)
        CHECK(std::fabs(a[i] - b[i]) <= 1e-4 * std::max(1.0, std::fabs(a[i])));
}

TEST_CASE("checkpoint round trip preserves trainer state") {
    TrainConfig cfg = toy_config();
    TrainerState st = TrainerState::init(cfg);
    Rng rng(110);
    Tensor batch = rand_uniform(rng, {4, 3, 32, 32});
    REQUIRE(train_step(st, batch).ok);
    st.model.threshold = 0.42;
    st.best_val_auc = 0.87;

    Checkpoint c;
    pack_trainer(c, st);
    const auto tmp = std::filesystem::temp_directory_path() / "faceseal_test.ckpt";
    c.save(tmp);
    Checkpoint loaded = Checkpoint::load(tmp);
    TrainerState st2 = unpack_trainer(loaded);

    CHECK(st2.step == st.step);
    CHECK(st2.model.threshold == Catch::Approx(0.42));
    CHECK(st2.best_val_auc == Catch::Approx(0.87));
    CHECK(max_abs_diff(st2.model.tmpl.data, st.model.tmpl.data) == 0.0);
    CHECK(max_abs_diff(st2.model.steg.blocks[0].phi.convs[0].w,
                       st.model.steg.blocks[0].phi.convs[0].w) == 0.0);
    CHECK(max_abs_diff(st2.opt.at("det.conv0.w").m, st.opt.at("det.conv0.w").m) == 0.0);
    CHECK(st2.opt.at("det.conv0.w").t == st.opt.at("det.conv0.w").t);
    CHECK(serialize(st2.model.cfg) == serialize(st.model.cfg));
    std::filesystem::remove(tmp);
}
