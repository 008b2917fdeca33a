#include "oralnet/head_trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>

#include "oralnet/errors.hpp"
#include "shuffle.hpp"

namespace oralnet {

void FeatureSet::validate() const {
    if (features.rank() != 2)
        throw ShapeError("feature matrix must be N x D, got " + shape_string(features.shape()));
    if (features.dim(0) != labels.size())
        throw ShapeError("feature rows (" + std::to_string(features.dim(0)) +
                         ") != label count (" + std::to_string(labels.size()) + ")");
    if (!features.all_finite()) throw DataError("feature matrix contains non-finite values");
}

FeatureSet extract_features(const ModelGraph& model, std::span<const Tensor> inputs,
                            std::span<const Label> labels) {
    if (inputs.size() != labels.size())
        throw UsageError("extract_features: " + std::to_string(inputs.size()) + " inputs but " +
                         std::to_string(labels.size()) + " labels");
    FeatureSet set;
    set.features = Tensor({inputs.size(), kFeatureDim});
    set.labels.assign(labels.begin(), labels.end());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const Tensor f = model.backbone_features(inputs[i]);
        std::copy(f.data().begin(), f.data().end(), set.features.raw() + i * kFeatureDim);
    }
    return set;
}

void save_feature_set(const FeatureSet& set, const std::filesystem::path& path) {
    set.validate();
    WeightStore store;
    store.insert("features", set.features);
    std::vector<float> labels(set.labels.size());
    std::transform(set.labels.begin(), set.labels.end(), labels.begin(),
                   [](Label l) { return static_cast<float>(l); });
    store.insert("labels", Tensor::vector(std::move(labels)));
    write_weights_file(store, path);
}

FeatureSet load_feature_set(const std::filesystem::path& path) {
    const WeightStore store = read_weights_file(path);
    FeatureSet set;
    set.features = store.at("features");
    const Tensor& labels = store.at("labels");
    if (labels.rank() != 1) throw FormatError("labels must be a vector");
    for (float v : labels.data()) {
        if (v != 0.0f && v != 1.0f) throw DataError("labels must be 0 or 1");
        set.labels.push_back(v == 1.0f ? Label::calculus : Label::no_calculus);
    }
    set.validate();
    return set;
}

// --------------------------------------------------------------------- loss

double bce_loss(std::span<const double> labels, std::span<const double> probabilities,
                LogBase base) {
    if (labels.empty()) throw UsageError("bce_loss: empty input");
    if (labels.size() != probabilities.size())
        throw UsageError("bce_loss: label and probability counts differ");
    const double lo = kProbabilityClamp, hi = 1.0 - kProbabilityClamp;
    double sum = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double p = std::clamp(probabilities[i], lo, hi);
        sum += labels[i] * std::log(p) + (1.0 - labels[i]) * std::log(1.0 - p);
    }
    double loss = -sum / static_cast<double>(labels.size());
    if (base == LogBase::two) loss /= std::numbers::ln2;
    return loss;
}

// --------------------------------------------------------------------- adam

std::pair<std::vector<double>, AdamState> adam_step(std::span<const double> params,
                                                    std::span<const double> grads,
                                                    const AdamState& state,
                                                    const AdamConfig& config) {
    const std::size_t n = params.size();
    if (grads.size() != n)
        throw ShapeError("adam_step: gradient length " + std::to_string(grads.size()) +
                         " != parameter length " + std::to_string(n));
    if (state.m.size() != n || state.v.size() != n)
        throw ShapeError("adam_step: optimizer state does not match parameter length " +
                         std::to_string(n));
    AdamState next{state.m, state.v, state.t + 1};
    std::vector<double> out(params.begin(), params.end());
    const double t = static_cast<double>(next.t);
    const double correct1 = 1.0 - std::pow(config.beta1, t);
    const double correct2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t i = 0; i < n; ++i) {
        next.m[i] = config.beta1 * next.m[i] + (1.0 - config.beta1) * grads[i];
        next.v[i] = config.beta2 * next.v[i] + (1.0 - config.beta2) * grads[i] * grads[i];
        const double m_hat = next.m[i] / correct1;
        const double v_hat = next.v[i] / correct2;
        out[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
    return {std::move(out), std::move(next)};
}

// --------------------------------------------------------------------- head

HeadParams HeadParams::zeros(std::size_t dim) {
    return {dim, std::vector<double>(kNumClasses * dim), std::vector<double>(kNumClasses)};
}

HeadParams HeadParams::random(std::size_t dim, std::uint64_t seed) {
    HeadParams h = zeros(dim);
    std::mt19937_64 rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    auto draw = [&] { return (static_cast<double>(rng() >> 11) * 0x1p-53 * 2.0 - 1.0) * bound; };
    for (auto& w : h.weight) w = draw();
    for (auto& b : h.bias) b = draw();
    return h;
}

std::vector<double> HeadParams::flatten() const {
    std::vector<double> flat(weight);
    flat.insert(flat.end(), bias.begin(), bias.end());
    return flat;
}

HeadParams HeadParams::unflatten(std::size_t dim, std::span<const double> flat) {
    if (flat.size() != kNumClasses * dim + kNumClasses)
        throw ShapeError("head parameter vector has wrong length");
    HeadParams h;
    h.dim = dim;
    h.weight.assign(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(kNumClasses * dim));
    h.bias.assign(flat.end() - kNumClasses, flat.end());
    return h;
}

std::array<double, 2> HeadParams::logits(std::span<const float> features) const {
    if (features.size() != dim)
        throw ShapeError("head expects " + std::to_string(dim) + " features, got " +
                         std::to_string(features.size()));
    std::array<double, 2> z{bias[0], bias[1]};
    for (std::size_t k = 0; k < kNumClasses; ++k) {
        const double* w = weight.data() + k * dim;
        double acc = 0.0;
        for (std::size_t j = 0; j < dim; ++j) acc += w[j] * static_cast<double>(features[j]);
        z[k] += acc;
    }
    return z;
}

Tensor HeadParams::weight_tensor() const {
    std::vector<float> w(weight.begin(), weight.end());
    return Tensor({kNumClasses, dim}, std::move(w));
}

Tensor HeadParams::bias_tensor() const {
    return Tensor({kNumClasses}, std::vector<float>(bias.begin(), bias.end()));
}

double positive_probability(const std::array<double, 2>& logits) {
    const double d = logits[0] - logits[1];
    if (d >= 0.0) {
        const double e = std::exp(-d);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(d));
}

LossGrad head_loss_and_grad(const HeadParams& head, const FeatureSet& data,
                            std::span<const std::size_t> rows, LogBase base) {
    if (rows.empty()) throw UsageError("head_loss_and_grad: empty batch");
    const std::size_t dim = head.dim;
    LossGrad out{0.0, std::vector<double>(kNumClasses * dim + kNumClasses)};
    std::vector<double> y(rows.size()), p(rows.size());
    const double scale =
        1.0 / static_cast<double>(rows.size()) / (base == LogBase::two ? std::numbers::ln2 : 1.0);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto f = data.row(rows[r]);
        y[r] = data.labels[rows[r]] == Label::calculus ? 1.0 : 0.0;
        p[r] = positive_probability(head.logits(f));
        // d(-ln softmax_y)/dz_k = softmax_k - [k == y]
        const double dz1 = (p[r] - y[r]) * scale;
        const double dz[2] = {-dz1, dz1};
        for (std::size_t k = 0; k < kNumClasses; ++k) {
            double* g = out.grad.data() + k * dim;
            for (std::size_t j = 0; j < dim; ++j) g[j] += dz[k] * static_cast<double>(f[j]);
            out.grad[kNumClasses * dim + k] += dz[k];
        }
    }
    out.loss = bce_loss(y, p, base);
    return out;
}

std::pair<double, double> head_loss_accuracy(const HeadParams& head, const FeatureSet& data,
                                             LogBase base) {
    if (data.rows() == 0) throw UsageError("empty feature set");
    std::vector<double> y(data.rows()), p(data.rows());
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.rows(); ++i) {
        const auto z = head.logits(data.row(i));
        y[i] = data.labels[i] == Label::calculus ? 1.0 : 0.0;
        p[i] = positive_probability(z);
        const bool positive = z[1] >= z[0];
        correct += positive == (y[i] == 1.0);
    }
    return {bce_loss(y, p, base), static_cast<double>(correct) / static_cast<double>(data.rows())};
}

// ----------------------------------------------------------------- training

TrainConfig TrainConfig::for_architecture(Architecture arch, std::uint64_t seed) {
    TrainConfig c;
    c.arch = arch;
    c.seed = seed;
    if (arch == Architecture::resnet34) {
        c.batch_size = 128;
        c.epochs = 30;
    } else {
        c.batch_size = 32;
        c.epochs = 50;
    }
    return c;
}

TrainResult train_head(const FeatureSet& train, const FeatureSet& validation,
                       const TrainConfig& config) {
    if (config.batch_size == 0) throw UsageError("batch size must be at least 1");
    if (config.epochs == 0) throw UsageError("epoch count must be at least 1");
    train.validate();
    validation.validate();
    if (train.dim() != kFeatureDim)
        throw ShapeError("training features must have dimension 1000, got " +
                         std::to_string(train.dim()));
    if (validation.dim() != train.dim())
        throw ShapeError("validation feature dimension differs from training");
    if (validation.rows() == 0) throw DataError("validation split is empty");
    const auto positives = std::count(train.labels.begin(), train.labels.end(), Label::calculus);
    if (positives == 0 || positives == static_cast<std::ptrdiff_t>(train.rows()))
        throw DataError("training split must contain both classes");

    std::mt19937_64 rng(config.seed);
    HeadParams head = HeadParams::random(train.dim(), rng());
    std::vector<double> params = head.flatten();
    AdamState state = AdamState::fresh(params.size());

    std::vector<std::size_t> order(train.rows());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainResult result;
    result.best.val_accuracy = -1.0;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        detail::shuffle(order, rng);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            const std::span<const std::size_t> batch(order.data() + start, stop - start);
            const auto lg = head_loss_and_grad(HeadParams::unflatten(train.dim(), params), train,
                                               batch, config.log_base);
            std::tie(params, state) = adam_step(params, lg.grad, state, config.adam);
        }
        head = HeadParams::unflatten(train.dim(), params);
        EpochMetrics m;
        m.epoch = epoch;
        std::tie(m.train_loss, m.train_acc) = head_loss_accuracy(head, train, config.log_base);
        std::tie(m.val_loss, m.val_acc) = head_loss_accuracy(head, validation, config.log_base);
        result.curves.push_back(m);
        if (m.val_acc > result.best.val_accuracy) result.best = {head, epoch, m.val_acc};
    }
    result.last = std::move(head);
    return result;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
    for (double v : checkpoint.head.flatten())
        if (!std::isfinite(v)) throw DataError("checkpoint parameters must be finite");
    WeightStore store;
    store.insert("head.weight", checkpoint.head.weight_tensor());
    store.insert("head.bias", checkpoint.head.bias_tensor());
    store.insert("checkpoint.epoch", Tensor({}, {static_cast<float>(checkpoint.epoch)}));
    store.insert("checkpoint.val_accuracy",
                 Tensor({}, {static_cast<float>(checkpoint.val_accuracy)}));
    write_weights_file(store, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const WeightStore store = read_weights_file(path);
    const Tensor& w = store.at("head.weight");
    const Tensor& b = store.at("head.bias");
    if (w.rank() != 2 || w.dim(0) != kNumClasses || b.shape() != Tensor::Shape{kNumClasses})
        throw ShapeError("checkpoint head must be 2 x D weight and 2 bias");
    Checkpoint c;
    c.head.dim = w.dim(1);
    c.head.weight.assign(w.data().begin(), w.data().end());
    c.head.bias.assign(b.data().begin(), b.data().end());
    if (const Tensor* e = store.find("checkpoint.epoch")) c.epoch = static_cast<std::size_t>((*e)[0]);
    if (const Tensor* a = store.find("checkpoint.val_accuracy")) c.val_accuracy = (*a)[0];
    return c;
}

void write_curves_csv(const std::vector<EpochMetrics>& curves, std::ostream& out) {
    out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
    const auto old = out.precision(8);
    for (const auto& m : curves)
        out << m.epoch << ',' << m.train_loss << ',' << m.train_acc << ',' << m.val_loss << ','
            << m.val_acc << '\n';
    out.precision(old);
}

}  // namespace oralnet
