#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "oralnet/kernels.hpp"
#include "oralnet/tensor.hpp"
#include "oralnet/weight_io.hpp"

namespace oralnet {

enum class Architecture { mobilenet_v3_small, resnet34 };

Architecture parse_architecture(std::string_view name);
std::string_view architecture_name(Architecture arch);

inline constexpr std::size_t kInputSize = 224;
inline constexpr std::size_t kFeatureDim = 1000;
inline constexpr std::size_t kNumClasses = 2;

/// One (name, MACs) line of a MAC report.
struct MacRow {
    std::string name;
    MacCount macs;
};

struct MacReport {
    std::vector<MacRow> rows;

    void add(std::string name, MacCount macs) { rows.push_back({std::move(name), macs}); }
    MacCount total() const;
};

/// Convolution, optionally followed by an inference batch-norm (folded into
/// the weights at bind time) and an activation. `name` and `bn` are the
/// weight-store prefixes.
struct ConvUnit {
    std::string name;
    std::string bn;  // empty: no batch-norm
    ConvSpec spec;
    bool has_bias = false;
    Activation act = Activation::identity;
    double bn_epsilon = 1e-5;

    Tensor weight;  // folded
    Tensor bias;    // folded; empty if the unit has neither bias nor batch-norm
};

/// ResNet basic block: relu(bn2(conv2(relu(bn1(conv1 x)))) + shortcut(x)).
struct BasicBlock {
    std::string name;
    ConvUnit conv1;
    ConvUnit conv2;
    std::optional<ConvUnit> downsample;
};

/// x * hard_sigmoid(fc2(relu(fc1(avgpool x))))
struct SqueezeExcite {
    std::string name;
    ConvUnit fc1;
    ConvUnit fc2;
};

/// MobileNetV3 bottleneck: optional 1x1 expansion, depthwise conv, optional
/// squeeze-excite, linear 1x1 projection, identity shortcut when shapes allow.
struct InvertedResidual {
    std::string name;
    std::optional<ConvUnit> expand;
    ConvUnit depthwise;
    std::optional<SqueezeExcite> se;
    ConvUnit project;
    bool residual = false;
};

struct MaxPool {
    std::string name;
    PoolSpec spec;
};

struct AvgPool {
    std::string name;
};

struct Dense {
    std::string name;
    std::size_t in_features = 0;
    std::size_t out_features = 0;
    Activation act = Activation::identity;
    Tensor weight;
    Tensor bias;
};

using Layer = std::variant<ConvUnit, BasicBlock, InvertedResidual, MaxPool, AvgPool, Dense>;

/// Name of a layer (its weight prefix).
const std::string& layer_name(const Layer& layer);

/// Output shape of one layer for the given input; throws ShapeError on mismatch.
Tensor::Shape infer_shape(const Layer& layer, const Tensor::Shape& input);

/// Runs a single bound layer. When `report` is given, kernel MACs are appended
/// to it with the same row names count_macs uses.
Tensor run_layer(const Layer& layer, Tensor input, MacReport* report = nullptr);

/// Appends the static MAC rows of one layer for the given input shape.
void layer_macs(const Layer& layer, const Tensor::Shape& input, MacReport& report);

/// (name, shape) of every tensor the unfolded store must hold for `layer`.
void layer_tensors(const Layer& layer, std::vector<std::pair<std::string, Tensor::Shape>>& out);

struct BuildOptions {
    /// When false a missing head is allowed; bind it later with bind_head().
    bool require_head = true;
};

/// Executable network: architecture backbone (ImageNet classifier included)
/// followed by the appended 1000 -> 2 head.
class ModelGraph {
public:
    Architecture architecture() const noexcept { return arch_; }
    const std::vector<Layer>& layers() const noexcept { return layers_; }
    const std::optional<Dense>& head() const noexcept { return head_; }
    bool has_head() const noexcept { return head_.has_value() && !head_->weight.empty(); }
    bool bound() const noexcept { return bound_; }

    /// Installs head parameters (2 x 1000 weight, 2 bias).
    void bind_head(Tensor weight, Tensor bias);

    /// Raw logits (length 2). Input must be 3 x 224 x 224.
    Tensor forward(const Tensor& input) const;
    /// Same, also returning the MACs reported by the kernels layer by layer.
    std::pair<Tensor, MacReport> forward_with_report(const Tensor& input) const;
    /// Output of the frozen backbone (length 1000), head skipped.
    Tensor backbone_features(const Tensor& input) const;
    /// Applies only the head to a 1000-vector.
    Tensor head_logits(const Tensor& features) const;

    /// Static traversal: per-layer rows (conv, batch-norm, fully connected) and total.
    MacReport count_macs(const Tensor::Shape& input_shape) const;

    std::uint64_t backbone_parameter_count() const noexcept { return backbone_params_; }
    std::uint64_t head_parameter_count() const noexcept {
        return kFeatureDim * kNumClasses + kNumClasses;
    }

private:
    friend ModelGraph describe_model(Architecture arch);
    friend ModelGraph build_model(Architecture arch, const WeightStore& weights,
                                  const BuildOptions& options);

    Architecture arch_ = Architecture::mobilenet_v3_small;
    std::vector<Layer> layers_;
    std::optional<Dense> head_;
    std::uint64_t backbone_params_ = 0;
    bool bound_ = false;

    Tensor run_backbone(const Tensor& input, MacReport* report) const;
    void check_input(const Tensor& input) const;
};

/// Layer structure only (no parameters); enough for count_macs and
/// required_tensors.
ModelGraph describe_model(Architecture arch);

/// Binds every tensor from `weights` (batch-norm folded here) and validates
/// shapes end to end at 3 x 224 x 224. Throws MissingWeightError / ShapeError.
ModelGraph build_model(Architecture arch, const WeightStore& weights,
                       const BuildOptions& options = {});

/// Every tensor name and shape build_model reads, in store order, head last.
std::vector<std::pair<std::string, Tensor::Shape>> required_tensors(Architecture arch,
                                                                   bool include_head = true);

/// Deterministic stand-in parameters for an architecture (conv weights
/// He-uniform, batch-norm statistics near identity), keyed by tensor name.
/// The fixture generator in tests/fixtures implements the same stream.
WeightStore synthesize_weights(Architecture arch, std::uint64_t seed, bool include_head = true);

/// The value stream behind synthesize_weights for one named tensor.
Tensor synthesize_tensor(const std::string& name, const Tensor::Shape& shape, std::uint64_t seed);

}  // namespace oralnet
