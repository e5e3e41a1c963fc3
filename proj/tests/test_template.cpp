#include <catch2/catch_amalgamated.hpp>

#include "faceseal/secret_template.hpp"
#include "faceseal/trainer.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace faceseal;

TEST_CASE("template init: mid-gray, host-image shape") {
    SecretTemplate t = SecretTemplate::make(16, 16);
    CHECK(t.data.shape == std::vector<int>{3, 16, 16});
    for (float v : t.data.data) CHECK(v == 0.5f);
}

TEST_CASE("loss_sec: zero when template matches every host") {
    Rng rng(81);
    Tensor img = rand_uniform(rng, {3, 8, 8});
    Graph g;
    Var s = g.constant(Tensor({1, 3, 8, 8}, img.data));
    Tensor batch({2, 3, 8, 8});
    std::copy(img.data.begin(), img.data.end(), batch.data.begin());
    std::copy(img.data.begin(), img.data.end(), batch.data.begin() + img.numel());
    Var l = loss_sec(g, s, g.constant(batch));
    CHECK(g.val(l)[0] < 1e-5);

    // constant template vs constant hosts of the same value
    Graph g2;
    Var s2 = g2.constant(Tensor::full({1, 3, 8, 8}, 0.5f));
    Var b2 = g2.constant(Tensor::full({3, 3, 8, 8}, 0.5f));
    CHECK(g2.val(loss_sec(g2, s2, b2))[0] == 0.0f);
}

TEST_CASE("loss_sec: two-image 4x4 toy batch matches the scalar Haar-LL oracle") {
    Rng rng(82);
    Tensor s = rand_uniform(rng, {3, 4, 4});
    Tensor i0 = rand_uniform(rng, {3, 4, 4});
    Tensor i1 = rand_uniform(rng, {3, 4, 4});

    auto lls = oracle::haar_forward(s);
    auto ll0 = oracle::haar_forward(i0);
    auto ll1 = oracle::haar_forward(i1);
    std::vector<std::vector<double>> diffs(2);
    for (size_t k = 0; k < lls.ll.size(); ++k) {
        diffs[0].push_back(lls.ll[k] - ll0.ll[k]);
        diffs[1].push_back(lls.ll[k] - ll1.ll[k]);
    }
    const double expect = oracle::mean_rss(diffs);

    Graph g;
    Tensor batch({2, 3, 4, 4});
    std::copy(i0.data.begin(), i0.data.end(), batch.data.begin());
    std::copy(i1.data.begin(), i1.data.end(), batch.data.begin() + i0.numel());
    Var l = loss_sec(g, g.constant(Tensor({1, 3, 4, 4}, s.data)), g.constant(batch));
    CHECK(g.val(l)[0] == Catch::Approx(expect).margin(1e-5));
}

TEST_CASE("loss_rec: trivials, constant-offset closed form, order invariance") {
    Rng rng(83);
    Tensor s = rand_uniform(rng, {3, 8, 8});
    Graph g;
    Var sv = g.constant(Tensor({1, 3, 8, 8}, s.data));

    Tensor same({2, 3, 8, 8});
    std::copy(s.data.begin(), s.data.end(), same.data.begin());
    std::copy(s.data.begin(), s.data.end(), same.data.begin() + s.numel());
    CHECK(g.val(loss_rec(g, g.constant(same), sv))[0] == 0.0f);

    // S_hat = S + c everywhere -> c * sqrt(numel) per the rss convention
    const float c = 0.25f;
    Tensor offset = same;
    for (auto& v : offset.data) v += c;
    Var l = loss_rec(g, g.constant(offset), sv);
    CHECK(g.val(l)[0] == Catch::Approx(double(c) * std::sqrt(double(s.numel()))).epsilon(1e-4));

    // batch order invariance
    Tensor a = rand_uniform(rng, {3, 8, 8}), b = rand_uniform(rng, {3, 8, 8});
    Tensor ab({2, 3, 8, 8}), ba({2, 3, 8, 8});
    std::copy(a.data.begin(), a.data.end(), ab.data.begin());
    std::copy(b.data.begin(), b.data.end(), ab.data.begin() + a.numel());
    std::copy(b.data.begin(), b.data.end(), ba.data.begin());
    std::copy(a.data.begin(), a.data.end(), ba.data.begin() + a.numel());
    Graph g2;
    Var sv2 = g2.constant(Tensor({1, 3, 8, 8}, s.data));
    CHECK(g2.val(loss_rec(g2, g2.constant(ab), sv2))[0] ==
          Catch::Approx(double(g2.val(loss_rec(g2, g2.constant(ba), sv2))[0])).margin(1e-6));
}

TEST_CASE("project clamps to [0,1]") {
    SecretTemplate t = SecretTemplate::make(4, 4);
    t.data[0] = -0.5f;
    t.data[1] = 1.5f;
    t.data[2] = 0.25f;
    project(t);
    CHECK(t.data[0] == 0.0f);
    CHECK(t.data[1] == 1.0f);
    CHECK(t.data[2] == 0.25f);
}

TEST_CASE("template receives gradient from all four loss terms") {
    // one toy training step; the template participates in hide, the residual,
    // the LL anchor and (via restoration) the reconstruction loss
    TrainConfig cfg;
    cfg.image_size = 32;
    cfg.batch_size = 2;
    cfg.subnet_growth = 4;
    cfg.detector_width = 4;
    cfg.seed = 84;
    TrainerState st = TrainerState::init(cfg);

    Rng rng(85);
    Tensor batch = rand_uniform(rng, {2, 3, 32, 32});

    // isolate each loss by zeroing the other lambdas
    const char* names[] = {"steg", "sec", "rec", "det"};
    for (int term = 0; term < 4; ++term) {
        TrainerState s2 = TrainerState::init(cfg);
        s2.model.cfg.lambda1 = term == 0 ? 1.0 : 0.0;
        s2.model.cfg.lambda2 = term == 1 ? 1.0 : 0.0;
        s2.model.cfg.lambda3 = term == 2 ? 1.0 : 0.0;
        s2.model.cfg.lambda4 = term == 3 ? 1.0 : 0.0;
        // nonzero final layers so the steg path actually moves the template
        Rng nz(86);
        visit_params(s2.model.steg, [&](const std::string&, Tensor& t) {
            if (sum_sq(t) == 0.0)
                for (auto& v : t.data) v = float(nz.normal()) * 0.05f;
        });
        Tensor before = s2.model.tmpl.data;
        StepStats stats = train_step(s2, batch);
        INFO("loss term: " << names[term]);
        CHECK(stats.ok);
        CHECK(max_abs_diff(before, s2.model.tmpl.data) > 0.0);
    }
}
