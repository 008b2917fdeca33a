#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "oralnet/model.hpp"
#include "oralnet/preprocess.hpp"
#include "oralnet/tensor.hpp"
#include "oralnet/weight_io.hpp"

namespace oralnet {

/// N x D backbone outputs with one label per row.
struct FeatureSet {
    Tensor features;  // N x D
    std::vector<Label> labels;

    std::size_t rows() const noexcept { return labels.size(); }
    std::size_t dim() const { return features.rank() == 2 ? features.dim(1) : 0; }
    std::span<const float> row(std::size_t i) const {
        return features.data().subspan(i * dim(), dim());
    }
    /// Row count matches label count, rank is 2, every value finite.
    void validate() const;

    friend bool operator==(const FeatureSet&, const FeatureSet&) = default;
};

/// Row i = frozen backbone output for inputs[i]; the head is never applied.
FeatureSet extract_features(const ModelGraph& model, std::span<const Tensor> inputs,
                            std::span<const Label> labels);

/// Cache layout: tensors "features" (N x D) and "labels" (N, as 0.0 / 1.0).
void save_feature_set(const FeatureSet& set, const std::filesystem::path& path);
FeatureSet load_feature_set(const std::filesystem::path& path);

enum class LogBase { two, e };

inline constexpr double kProbabilityClamp = 1e-7;

/// L = -(1/N) sum[y log p + (1 - y) log(1 - p)], p clamped to
/// [kProbabilityClamp, 1 - kProbabilityClamp], log in the requested base.
double bce_loss(std::span<const double> labels, std::span<const double> probabilities,
                LogBase base = LogBase::two);

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;

    static AdamState fresh(std::size_t n) { return {std::vector<double>(n), std::vector<double>(n), 0}; }
};

/// One bias-corrected Adam update. Pure: inputs are left untouched.
std::pair<std::vector<double>, AdamState> adam_step(std::span<const double> params,
                                                    std::span<const double> grads,
                                                    const AdamState& state,
                                                    const AdamConfig& config);

/// Linear 2-way head in double precision: logits = W f + b, W row-major 2 x D.
struct HeadParams {
    std::size_t dim = kFeatureDim;
    std::vector<double> weight;  // 2 * dim
    std::vector<double> bias;    // 2

    static HeadParams zeros(std::size_t dim);
    /// Uniform(-1/sqrt(dim), 1/sqrt(dim)) from the given seed.
    static HeadParams random(std::size_t dim, std::uint64_t seed);

    std::vector<double> flatten() const;
    static HeadParams unflatten(std::size_t dim, std::span<const double> flat);
    std::array<double, 2> logits(std::span<const float> features) const;

    Tensor weight_tensor() const;
    Tensor bias_tensor() const;
};

/// Probability of the positive class from two logits (softmax over N = 2).
double positive_probability(const std::array<double, 2>& logits);

struct LossGrad {
    double loss = 0.0;
    std::vector<double> grad;  // same layout as HeadParams::flatten()
};

/// Mean binary cross-entropy of the softmax head over `rows`, and its analytic
/// gradient with respect to the flattened head parameters.
LossGrad head_loss_and_grad(const HeadParams& head, const FeatureSet& data,
                            std::span<const std::size_t> rows, LogBase base);

struct TrainConfig {
    Architecture arch = Architecture::mobilenet_v3_small;
    std::size_t batch_size = 32;
    std::size_t epochs = 50;
    AdamConfig adam;
    std::uint64_t seed = 0;
    LogBase log_base = LogBase::two;

    /// ResNet34: batch 128, 30 epochs. MobileNetV3-Small: batch 32, 50 epochs.
    static TrainConfig for_architecture(Architecture arch, std::uint64_t seed = 0);
};

struct EpochMetrics {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;

    friend bool operator==(const EpochMetrics&, const EpochMetrics&) = default;
};

struct Checkpoint {
    HeadParams head;
    std::size_t epoch = 0;
    double val_accuracy = 0.0;
};

struct TrainResult {
    Checkpoint best;  // highest validation accuracy, earliest on ties
    HeadParams last;
    std::vector<EpochMetrics> curves;
};

/// Frozen-backbone transfer learning: only the head is optimised.
TrainResult train_head(const FeatureSet& train, const FeatureSet& validation,
                       const TrainConfig& config);

/// Loss and accuracy of a head over a whole feature set.
std::pair<double, double> head_loss_accuracy(const HeadParams& head, const FeatureSet& data,
                                             LogBase base);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// `epoch,train_loss,train_acc,val_loss,val_acc`
void write_curves_csv(const std::vector<EpochMetrics>& curves, std::ostream& out);

}  // namespace oralnet
