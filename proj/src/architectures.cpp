// Layer tables for the two supported backbones. Tensor names follow the
// torchvision state_dict layout so exported ImageNet weights bind unchanged.

#include <array>
#include <string>

#include "oralnet/errors.hpp"
#include "oralnet/model.hpp"

namespace oralnet {

namespace detail {
std::vector<Layer> resnet34_layers();
std::vector<Layer> mobilenet_v3_small_layers();
Dense classification_head();
}  // namespace detail

namespace {

ConvUnit conv_bn(std::string name, std::string bn, std::size_t in, std::size_t out,
                 std::size_t kernel, std::size_t stride, std::size_t groups, Activation act,
                 double eps) {
    ConvUnit u;
    u.name = std::move(name);
    u.bn = std::move(bn);
    u.spec = ConvSpec{out, in, kernel, kernel, stride, (kernel - 1) / 2, groups};
    u.act = act;
    u.bn_epsilon = eps;
    return u;
}

// ---------------------------------------------------------------- ResNet34

struct ResNetStage {
    std::size_t channels;
    std::size_t blocks;
    std::size_t stride;
};

// He et al. 2016, Table 1, "34-layer" column: conv2_x..conv5_x.
constexpr std::array<ResNetStage, 4> kResNet34Stages{{
    {64, 3, 1},   // conv2_x, 56x56
    {128, 4, 2},  // conv3_x, 28x28
    {256, 6, 2},  // conv4_x, 14x14
    {512, 3, 2},  // conv5_x, 7x7
}};

constexpr double kResNetBnEps = 1e-5;

// ------------------------------------------------------ MobileNetV3-Small

struct BneckRow {
    std::size_t in;
    std::size_t kernel;
    std::size_t expanded;
    std::size_t out;
    bool se;
    Activation act;
    std::size_t stride;
};

constexpr Activation RE = Activation::relu;
constexpr Activation HS = Activation::hard_swish;

// Howard et al. 2019, Table 2 (MobileNetV3-Small), one row per bneck;
// widths as in the torchvision reference implementation.
constexpr std::array<BneckRow, 11> kMobileNetV3Small{{
    {16, 3, 16, 16, true, RE, 2},     // 112^2 x 16
    {16, 3, 72, 24, false, RE, 2},    // 56^2 x 16
    {24, 3, 88, 24, false, RE, 1},    // 28^2 x 24
    {24, 5, 96, 40, true, HS, 2},     // 28^2 x 24
    {40, 5, 240, 40, true, HS, 1},    // 14^2 x 40
    {40, 5, 240, 40, true, HS, 1},    // 14^2 x 40
    {40, 5, 120, 48, true, HS, 1},    // 14^2 x 40
    {48, 5, 144, 48, true, HS, 1},    // 14^2 x 48
    {48, 5, 288, 96, true, HS, 2},    // 14^2 x 48
    {96, 5, 576, 96, true, HS, 1},    // 7^2 x 96
    {96, 5, 576, 96, true, HS, 1},    // 7^2 x 96
}};

constexpr std::size_t kMobileNetStem = 16;
constexpr std::size_t kMobileNetLastConv = 576;  // 6 x 96
constexpr std::size_t kMobileNetLastChannel = 1024;
constexpr double kMobileNetBnEps = 1e-3;

std::size_t make_divisible(std::size_t v, std::size_t divisor = 8) {
    std::size_t rounded = std::max(divisor, (v + divisor / 2) / divisor * divisor);
    if (10 * rounded < 9 * v) rounded += divisor;
    return rounded;
}

Dense dense(std::string name, std::size_t in, std::size_t out, Activation act) {
    Dense d;
    d.name = std::move(name);
    d.in_features = in;
    d.out_features = out;
    d.act = act;
    return d;
}

}  // namespace

std::vector<Layer> detail::resnet34_layers() {
    std::vector<Layer> layers;
    layers.emplace_back(conv_bn("conv1", "bn1", 3, 64, 7, 2, 1, Activation::relu, kResNetBnEps));
    layers.emplace_back(MaxPool{"maxpool", PoolSpec{3, 2, 1}});
    std::size_t in = 64;
    for (std::size_t s = 0; s < kResNet34Stages.size(); ++s) {
        const auto& stage = kResNet34Stages[s];
        for (std::size_t b = 0; b < stage.blocks; ++b) {
            const std::string prefix = "layer" + std::to_string(s + 1) + "." + std::to_string(b);
            const std::size_t stride = b == 0 ? stage.stride : 1;
            BasicBlock block;
            block.name = prefix;
            block.conv1 = conv_bn(prefix + ".conv1", prefix + ".bn1", in, stage.channels, 3, stride,
                                  1, Activation::relu, kResNetBnEps);
            block.conv2 = conv_bn(prefix + ".conv2", prefix + ".bn2", stage.channels,
                                  stage.channels, 3, 1, 1, Activation::identity, kResNetBnEps);
            if (stride != 1 || in != stage.channels)
                block.downsample = conv_bn(prefix + ".downsample.0", prefix + ".downsample.1", in,
                                           stage.channels, 1, stride, 1, Activation::identity,
                                           kResNetBnEps);
            layers.emplace_back(std::move(block));
            in = stage.channels;
        }
    }
    layers.emplace_back(AvgPool{"avgpool"});
    layers.emplace_back(dense("fc", 512, kFeatureDim, Activation::identity));
    return layers;
}

std::vector<Layer> detail::mobilenet_v3_small_layers() {
    std::vector<Layer> layers;
    layers.emplace_back(conv_bn("features.0.0", "features.0.1", 3, kMobileNetStem, 3, 2, 1,
                                Activation::hard_swish, kMobileNetBnEps));
    for (std::size_t i = 0; i < kMobileNetV3Small.size(); ++i) {
        const auto& row = kMobileNetV3Small[i];
        const std::string prefix = "features." + std::to_string(i + 1);
        InvertedResidual block;
        block.name = prefix;
        std::size_t part = 0;
        auto next = [&] { return prefix + ".block." + std::to_string(part++); };
        if (row.expanded != row.in) {
            const auto p = next();
            block.expand = conv_bn(p + ".0", p + ".1", row.in, row.expanded, 1, 1, 1, row.act,
                                   kMobileNetBnEps);
        }
        {
            const auto p = next();
            block.depthwise = conv_bn(p + ".0", p + ".1", row.expanded, row.expanded, row.kernel,
                                      row.stride, row.expanded, row.act, kMobileNetBnEps);
        }
        if (row.se) {
            const auto p = next();
            const std::size_t squeeze = make_divisible(row.expanded / 4);
            SqueezeExcite se;
            se.name = p;
            se.fc1 = conv_bn(p + ".fc1", "", row.expanded, squeeze, 1, 1, 1, Activation::relu, 0.0);
            se.fc1.has_bias = true;
            se.fc2 = conv_bn(p + ".fc2", "", squeeze, row.expanded, 1, 1, 1,
                             Activation::hard_sigmoid, 0.0);
            se.fc2.has_bias = true;
            block.se = std::move(se);
        }
        {
            const auto p = next();
            block.project = conv_bn(p + ".0", p + ".1", row.expanded, row.out, 1, 1, 1,
                                    Activation::identity, kMobileNetBnEps);
        }
        block.residual = row.stride == 1 && row.in == row.out;
        layers.emplace_back(std::move(block));
    }
    const std::string last = "features." + std::to_string(kMobileNetV3Small.size() + 1);
    layers.emplace_back(conv_bn(last + ".0", last + ".1", kMobileNetV3Small.back().out,
                                kMobileNetLastConv, 1, 1, 1, Activation::hard_swish,
                                kMobileNetBnEps));
    layers.emplace_back(AvgPool{"avgpool"});
    layers.emplace_back(
        dense("classifier.0", kMobileNetLastConv, kMobileNetLastChannel, Activation::hard_swish));
    // classifier.2 is dropout, an identity at inference
    layers.emplace_back(dense("classifier.3", kMobileNetLastChannel, kFeatureDim,
                              Activation::identity));
    return layers;
}

Dense detail::classification_head() {
    return dense("head", kFeatureDim, kNumClasses, Activation::identity);
}

Architecture parse_architecture(std::string_view name) {
    if (name == "mobilenet_v3_small") return Architecture::mobilenet_v3_small;
    if (name == "resnet34") return Architecture::resnet34;
    throw UsageError("unknown architecture: " + std::string(name) +
                     " (expected mobilenet_v3_small or resnet34)");
}

std::string_view architecture_name(Architecture arch) {
    return arch == Architecture::resnet34 ? "resnet34" : "mobilenet_v3_small";
}

}  // namespace oralnet
