#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "oralnet/errors.hpp"
#include "oralnet/head_trainer.hpp"
#include "oralnet/model.hpp"

using namespace oralnet;

namespace {

FeatureSet gaussian_blobs(std::size_t n, std::size_t dim, double separation, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> direction(dim);
    std::mt19937_64 dir_rng(99);  // same direction for every call
    double norm = 0.0;
    for (auto& d : direction) {
        d = noise(dir_rng);
        norm += d * d;
    }
    for (auto& d : direction) d /= std::sqrt(norm);
    FeatureSet f;
    f.features = Tensor({n, dim});
    for (std::size_t i = 0; i < n; ++i) {
        const bool pos = i % 2 == 0;
        f.labels.push_back(pos ? Label::calculus : Label::no_calculus);
        for (std::size_t k = 0; k < dim; ++k)
            f.features[i * dim + k] =
                static_cast<float>(noise(rng) + (pos ? 0.5 : -0.5) * separation * direction[k]);
    }
    return f;
}

FeatureSet random_features(std::size_t n, std::size_t dim, std::mt19937_64& rng) {
    std::normal_distribution<float> d(0.0f, 1.0f);
    std::bernoulli_distribution coin(0.5);
    FeatureSet f;
    f.features = Tensor({n, dim});
    for (std::size_t i = 0; i < f.features.size(); ++i) f.features[i] = d(rng);
    for (std::size_t i = 0; i < n; ++i) f.labels.push_back(coin(rng) ? Label::calculus : Label::no_calculus);
    return f;
}

double clamp_p(double p) { return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp); }

}  // namespace

TEST_CASE("bce examples") {
    const std::vector<double> y1{1.0}, p1{0.5};
    CHECK(bce_loss(y1, p1, LogBase::two) == doctest::Approx(1.0).epsilon(1e-15));
    const std::vector<double> y2{1.0, 0.0}, p_perfect{1.0 - kProbabilityClamp, kProbabilityClamp};
    CHECK(bce_loss(y2, p_perfect, LogBase::two) < 1e-6);
    const std::vector<double> p_half{0.5, 0.5};
    CHECK(bce_loss(y2, p_half, LogBase::two) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(bce_loss(y1, p1, LogBase::e) == doctest::Approx(std::numbers::ln2).epsilon(1e-15));
    CHECK_THROWS_AS(bce_loss(std::vector<double>{}, std::vector<double>{}), UsageError);
    CHECK_THROWS_AS(bce_loss(y1, p_half), UsageError);
}

TEST_CASE("bce matches the written-out formula") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> p(1e-9, 1.0 - 1e-9);
    std::uniform_int_distribution<int> n(1, 12), bit(0, 1);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<double> ys, ps;
        for (int i = n(rng); i > 0; --i) {
            ys.push_back(bit(rng));
            ps.push_back(p(rng));
        }
        for (auto [base, value] : {std::pair{LogBase::two, 2.0}, std::pair{LogBase::e, std::numbers::e}}) {
            const double want = oracle::bce(ys, ps, value);
            CHECK(std::abs(bce_loss(ys, ps, base) - want) <= 1e-12 * std::max(1.0, std::abs(want)));
        }
        CHECK(bce_loss(ys, ps, LogBase::two) ==
              doctest::Approx(bce_loss(ys, ps, LogBase::e) / std::numbers::ln2).epsilon(1e-12));
        CHECK(bce_loss(ys, ps) >= 0.0);
    }
}

TEST_CASE("bce is monotone in the predicted probability") {
    const std::vector<double> pos{1.0}, neg{0.0};
    double last_pos = INFINITY, last_neg = -INFINITY;
    for (double p = 0.01; p < 1.0; p += 0.01) {
        const std::vector<double> ps{p};
        const double lp = bce_loss(pos, ps), ln = bce_loss(neg, ps);
        CHECK(lp < last_pos);
        CHECK(ln > last_neg);
        last_pos = lp;
        last_neg = ln;
    }
}

TEST_CASE("adam with zero gradient leaves parameters alone") {
    const std::vector<double> params{1.0, -2.0, 3.5};
    const std::vector<double> zero(3, 0.0);
    const auto [next, state] = adam_step(params, zero, AdamState::fresh(3), AdamConfig{});
    CHECK(next == params);
    CHECK(state.t == 1);
}

TEST_CASE("adam first step moves by about lr against the gradient sign") {
    const AdamConfig cfg;
    for (double g : {0.3, -7.0, 1e-3}) {
        const std::vector<double> p{0.0}, grad{g};
        const auto [next, state] = adam_step(p, grad, AdamState::fresh(1), cfg);
        CHECK(next[0] == doctest::Approx(-cfg.learning_rate * g / (std::abs(g) + cfg.epsilon)).epsilon(1e-12));
        CHECK(state.m[0] == doctest::Approx(0.1 * g));
        CHECK(state.v[0] == doctest::Approx(0.001 * g * g));
    }
    CHECK_THROWS_AS(adam_step(std::vector<double>(2), std::vector<double>(3), AdamState::fresh(2), cfg),
                    ShapeError);
}

TEST_CASE("adam minimizes a parabola") {
    AdamConfig cfg;
    cfg.learning_rate = 0.01;
    std::vector<double> theta{1.0};
    AdamState s = AdamState::fresh(1);
    // hand-rolled reference iteration of the published update
    double ref = 1.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 1000; ++t) {
        const std::vector<double> g{2.0 * theta[0]};
        std::tie(theta, s) = adam_step(theta, g, s, cfg);
        const double gr = 2.0 * ref;
        m = 0.9 * m + 0.1 * gr;
        v = 0.999 * v + 0.001 * gr * gr;
        ref -= 0.01 * (m / (1.0 - std::pow(0.9, t))) / (std::sqrt(v / (1.0 - std::pow(0.999, t))) + 1e-8);
    }
    CHECK(std::abs(theta[0]) < 0.05);
    CHECK(theta[0] == doctest::Approx(ref).epsilon(1e-12));
    CHECK(s.t == 1000);
}

TEST_CASE("analytic head gradient matches central differences") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        const FeatureSet data = random_features(12, 16, rng);
        const HeadParams head = HeadParams::random(16, rng());
        std::vector<std::size_t> rows{0, 3, 4, 7, 11};
        for (LogBase base : {LogBase::two, LogBase::e}) {
            const LossGrad lg = head_loss_and_grad(head, data, rows, base);
            const auto flat = head.flatten();
            const double h = 1e-6;
            for (std::size_t k = 0; k < flat.size(); ++k) {
                auto plus = flat, minus = flat;
                plus[k] += h;
                minus[k] -= h;
                const double fp = head_loss_and_grad(HeadParams::unflatten(16, plus), data, rows, base).loss;
                const double fm = head_loss_and_grad(HeadParams::unflatten(16, minus), data, rows, base).loss;
                const double numeric = (fp - fm) / (2 * h);
                const double scale = std::max({std::abs(numeric), std::abs(lg.grad[k]), 1e-6});
                REQUIRE(std::abs(numeric - lg.grad[k]) / scale <= 1e-4);
            }
        }
    }
}

TEST_CASE("head loss is binary cross-entropy of the softmax probability") {
    std::mt19937_64 rng(3);
    const FeatureSet data = random_features(6, 10, rng);
    const HeadParams head = HeadParams::random(10, 5);
    std::vector<std::size_t> rows{0, 1, 2, 3, 4, 5};
    std::vector<double> ys, ps;
    for (auto r : rows) {
        ys.push_back(data.labels[r] == Label::calculus ? 1.0 : 0.0);
        ps.push_back(clamp_p(positive_probability(head.logits(data.row(r)))));
    }
    CHECK(head_loss_and_grad(head, data, rows, LogBase::two).loss ==
          doctest::Approx(oracle::bce(ys, ps, 2.0)).epsilon(1e-12));
}

TEST_CASE("training configs") {
    const auto r = TrainConfig::for_architecture(Architecture::resnet34);
    CHECK(r.batch_size == 128);
    CHECK(r.epochs == 30);
    const auto m = TrainConfig::for_architecture(Architecture::mobilenet_v3_small);
    CHECK(m.batch_size == 32);
    CHECK(m.epochs == 50);
    CHECK(m.adam.learning_rate == 1e-3);
    CHECK(m.log_base == LogBase::two);
}

TEST_CASE("separable blobs are learned") {
    const FeatureSet train = gaussian_blobs(200, kFeatureDim, 6.0, 10);
    const FeatureSet val = gaussian_blobs(60, kFeatureDim, 6.0, 11);
    const auto cfg = TrainConfig::for_architecture(Architecture::mobilenet_v3_small, 5);
    const TrainResult r = train_head(train, val, cfg);
    REQUIRE(r.curves.size() == 50);
    CHECK(r.curves.back().train_acc >= 0.99);
    CHECK(r.curves.back().train_loss < r.curves.front().train_loss);

    // best checkpoint is the earliest epoch with the peak validation accuracy
    double peak = -1.0;
    std::size_t first = 0;
    for (const auto& m : r.curves)
        if (m.val_acc > peak) {
            peak = m.val_acc;
            first = m.epoch;
        }
    CHECK(r.best.epoch == first);
    CHECK(r.best.val_accuracy == peak);
    CHECK(head_loss_accuracy(r.best.head, val, LogBase::two).second == peak);
}

TEST_CASE("training is deterministic per seed") {
    const FeatureSet train = gaussian_blobs(64, kFeatureDim, 2.0, 20);
    const FeatureSet val = gaussian_blobs(20, kFeatureDim, 2.0, 21);
    TrainConfig cfg = TrainConfig::for_architecture(Architecture::resnet34, 77);
    cfg.epochs = 5;
    const TrainResult a = train_head(train, val, cfg);
    const TrainResult b = train_head(train, val, cfg);
    CHECK(a.curves == b.curves);
    CHECK(a.best.head.flatten() == b.best.head.flatten());
    cfg.seed = 78;
    CHECK(train_head(train, val, cfg).last.flatten() != a.last.flatten());
}

TEST_CASE("training preconditions") {
    FeatureSet one_class = gaussian_blobs(10, kFeatureDim, 1.0, 30);
    std::fill(one_class.labels.begin(), one_class.labels.end(), Label::calculus);
    const FeatureSet val = gaussian_blobs(4, kFeatureDim, 1.0, 31);
    CHECK_THROWS_AS(train_head(one_class, val, TrainConfig{}), DataError);
    FeatureSet empty_val;
    empty_val.features = Tensor({0, kFeatureDim});
    CHECK_THROWS_AS(train_head(gaussian_blobs(10, kFeatureDim, 1.0, 32), empty_val, TrainConfig{}), DataError);
    CHECK_THROWS_AS(train_head(gaussian_blobs(10, 8, 1.0, 33), gaussian_blobs(4, 8, 1.0, 34), TrainConfig{}),
                    ShapeError);
    TrainConfig zero_batch;
    zero_batch.batch_size = 0;
    CHECK_THROWS_AS(train_head(gaussian_blobs(10, kFeatureDim, 1.0, 35), val, zero_batch), UsageError);
}

TEST_CASE("checkpoint and feature cache round trips") {
    const auto dir = std::filesystem::temp_directory_path();
    Checkpoint c{HeadParams::random(kFeatureDim, 4), 17, 0.8125};
    for (auto& w : c.head.weight) w = static_cast<float>(w);  // the file stores 32-bit values
    save_checkpoint(c, dir / "oralnet_ckpt.tkws");
    const Checkpoint back = load_checkpoint(dir / "oralnet_ckpt.tkws");
    CHECK(back.epoch == 17);
    CHECK(back.val_accuracy == doctest::Approx(0.8125));
    CHECK(back.head.weight == c.head.weight);
    std::filesystem::remove(dir / "oralnet_ckpt.tkws");
    CHECK_THROWS_AS(load_checkpoint(dir / "oralnet_no_ckpt.tkws"), IoError);

    const FeatureSet f = gaussian_blobs(9, kFeatureDim, 1.0, 40);
    save_feature_set(f, dir / "oralnet_features.tkws");
    const FeatureSet g = load_feature_set(dir / "oralnet_features.tkws");
    CHECK(g.features == f.features);
    CHECK(g.labels == f.labels);
    std::filesystem::remove(dir / "oralnet_features.tkws");
}

TEST_CASE("curves csv") {
    std::ostringstream out;
    write_curves_csv({EpochMetrics{1, 0.5, 0.75, 0.25, 1.0}}, out);
    CHECK(out.str() == "epoch,train_loss,train_acc,val_loss,val_acc\n1,0.5,0.75,0.25,1\n");
}

TEST_CASE("extract_features is the frozen backbone") {
    BuildOptions opts;
    opts.require_head = false;
    const ModelGraph m =
        build_model(Architecture::mobilenet_v3_small, synthesize_weights(Architecture::mobilenet_v3_small, 1, false), opts);
    std::mt19937_64 rng(50);
    const Tensor x = oracle::random_tensor({3, 224, 224}, rng);
    const std::vector<Tensor> inputs{x, x};
    const std::vector<Label> labels{Label::calculus, Label::no_calculus};
    const FeatureSet f = extract_features(m, inputs, labels);
    REQUIRE(f.features.shape() == Tensor::Shape{2, kFeatureDim});
    CHECK(std::equal(f.row(0).begin(), f.row(0).end(), f.row(1).begin()));
    const Tensor direct = m.backbone_features(x);
    CHECK(std::equal(f.row(0).begin(), f.row(0).end(), direct.data().begin()));
    CHECK(f.labels == labels);
}
