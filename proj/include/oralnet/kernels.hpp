#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>

#include "oralnet/tensor.hpp"

namespace oralnet {

/// Multiply-accumulate count. Convolutions and fully connected layers count
/// one MAC per weight use; bias additions are not counted.
struct MacCount {
    std::uint64_t macs = 0;

    MacCount& operator+=(MacCount other) noexcept {
        macs += other.macs;
        return *this;
    }
    friend MacCount operator+(MacCount a, MacCount b) noexcept { return a += b; }
    friend bool operator==(MacCount, MacCount) = default;
};

struct ConvSpec {
    std::size_t out_channels = 0;
    std::size_t in_channels = 0;
    std::size_t kernel_h = 1;
    std::size_t kernel_w = 1;
    std::size_t stride = 1;
    std::size_t padding = 0;
    std::size_t groups = 1;

    bool depthwise() const noexcept { return groups > 1 && groups == in_channels; }
    Tensor::Shape weight_shape() const {
        return {out_channels, in_channels / groups, kernel_h, kernel_w};
    }
    /// Throws ShapeError unless channel counts divide by groups and all extents are positive.
    void validate() const;
    std::size_t output_extent(std::size_t input, std::size_t kernel) const;
    /// MACs for an input plane of height x width; validates the geometry.
    MacCount macs(std::size_t height, std::size_t width) const;
};

struct ConvResult {
    Tensor output;
    MacCount macs;
};

/// Cross-correlation with zero padding. `bias` may be empty. Each output
/// element accumulates in float32, channel-major then kernel row then column.
ConvResult conv2d(const Tensor& input, const Tensor& weights, std::span<const float> bias,
                  const ConvSpec& spec);

/// Folds inference batch-norm into the preceding convolution. Returns the
/// new (weights, bias); bias is always materialised.
std::pair<Tensor, Tensor> fold_batchnorm(const Tensor& conv_weights,
                                         std::span<const float> conv_bias,
                                         std::span<const float> gamma,
                                         std::span<const float> beta,
                                         std::span<const float> running_mean,
                                         std::span<const float> running_var, double epsilon);

/// Reference (unfolded) batch-norm over a C x H x W tensor.
Tensor batchnorm(const Tensor& x, std::span<const float> gamma, std::span<const float> beta,
                 std::span<const float> running_mean, std::span<const float> running_var,
                 double epsilon);

enum class Activation { identity, relu, relu6, hard_sigmoid, hard_swish, sigmoid, softmax };

/// Parses "relu", "relu6", "hard_sigmoid", "hard_swish", "sigmoid", "softmax",
/// "identity". Anything else is a UsageError.
Activation parse_activation(std::string_view name);
std::string_view activation_name(Activation kind);

float apply_scalar(Activation kind, float x);

/// Softmax runs over the last extent of `x`; every other kind is elementwise.
Tensor activation(Activation kind, const Tensor& x);
void activate_inplace(Activation kind, Tensor& x);

Tensor global_avg_pool(const Tensor& x);

struct PoolSpec {
    std::size_t kernel = 3;
    std::size_t stride = 2;
    std::size_t padding = 1;
    std::size_t output_extent(std::size_t input) const;
};

/// Max pooling; padded positions never win.
Tensor max_pool2d(const Tensor& x, const PoolSpec& spec);

struct LinearResult {
    Tensor output;
    MacCount macs;
};

/// y = W x + b with W of shape m x n. `x` may have any shape with n elements;
/// `bias` may be empty.
LinearResult linear(const Tensor& x, const Tensor& weights, std::span<const float> bias);

/// a += b, same shape.
void add_inplace(Tensor& a, const Tensor& b);

/// x[c, :, :] *= scale[c]
void scale_channels_inplace(Tensor& x, std::span<const float> scale);

}  // namespace oralnet
