#include "oralnet/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "oralnet/errors.hpp"

namespace oralnet {

namespace {

[[noreturn]] void shape_mismatch(const std::string& what, std::size_t expected, std::size_t got) {
    throw ShapeError(what + ": expected " + std::to_string(expected) + ", got " +
                     std::to_string(got));
}

// out[m x n] = a[m x k] * b[k x n]. Every output element sums over k in
// ascending order; tiling only changes which elements are in flight.
void gemm(const float* __restrict a, const float* __restrict b, float* __restrict out,
          std::size_t m, std::size_t k, std::size_t n) {
    constexpr std::size_t kCols = 256;
    alignas(64) float acc[4][kCols];
    for (std::size_t j0 = 0; j0 < n; j0 += kCols) {
        const std::size_t nb = std::min(kCols, n - j0);
        std::size_t i = 0;
        for (; i + 4 <= m; i += 4) {
            std::fill(&acc[0][0], &acc[0][0] + 4 * kCols, 0.0f);
            const float* a0 = a + i * k;
            const float* a1 = a0 + k;
            const float* a2 = a1 + k;
            const float* a3 = a2 + k;
            for (std::size_t p = 0; p < k; ++p) {
                const float* __restrict row = b + p * n + j0;
                const float w0 = a0[p], w1 = a1[p], w2 = a2[p], w3 = a3[p];
                for (std::size_t j = 0; j < nb; ++j) {
                    const float v = row[j];
                    acc[0][j] += w0 * v;
                    acc[1][j] += w1 * v;
                    acc[2][j] += w2 * v;
                    acc[3][j] += w3 * v;
                }
            }
            for (std::size_t r = 0; r < 4; ++r)
                std::copy(acc[r], acc[r] + nb, out + (i + r) * n + j0);
        }
        for (; i < m; ++i) {
            std::fill(acc[0], acc[0] + kCols, 0.0f);
            const float* ai = a + i * k;
            for (std::size_t p = 0; p < k; ++p) {
                const float* __restrict row = b + p * n + j0;
                const float w = ai[p];
                for (std::size_t j = 0; j < nb; ++j) acc[0][j] += w * row[j];
            }
            std::copy(acc[0], acc[0] + nb, out + i * n + j0);
        }
    }
}

// Unfolds channels [c0, c0 + channels) of a C x H x W plane stack into a
// (channels * kh * kw) x (oh * ow) matrix, zero where the window leaves the input.
void im2col(const float* input, std::size_t height, std::size_t width, std::size_t channels,
            const ConvSpec& spec, std::size_t oh, std::size_t ow, float* col) {
    const auto pad = static_cast<std::ptrdiff_t>(spec.padding);
    const auto stride = static_cast<std::ptrdiff_t>(spec.stride);
    for (std::size_t c = 0; c < channels; ++c) {
        const float* plane = input + c * height * width;
        for (std::size_t ky = 0; ky < spec.kernel_h; ++ky) {
            for (std::size_t kx = 0; kx < spec.kernel_w; ++kx) {
                float* dst = col + ((c * spec.kernel_h + ky) * spec.kernel_w + kx) * oh * ow;
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    const std::ptrdiff_t iy =
                        static_cast<std::ptrdiff_t>(oy) * stride - pad + static_cast<std::ptrdiff_t>(ky);
                    float* drow = dst + oy * ow;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height)) {
                        std::fill(drow, drow + ow, 0.0f);
                        continue;
                    }
                    const float* srow = plane + static_cast<std::size_t>(iy) * width;
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * stride - pad +
                                                  static_cast<std::ptrdiff_t>(kx);
                        drow[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(width))
                                       ? 0.0f
                                       : srow[static_cast<std::size_t>(ix)];
                    }
                }
            }
        }
    }
}

void depthwise(const Tensor& input, const Tensor& weights, const ConvSpec& spec, std::size_t oh,
               std::size_t ow, Tensor& out) {
    const std::size_t height = input.dim(1), width = input.dim(2);
    const auto pad = static_cast<std::ptrdiff_t>(spec.padding);
    const auto stride = static_cast<std::ptrdiff_t>(spec.stride);
    const std::size_t taps = spec.kernel_h * spec.kernel_w;
    for (std::size_t c = 0; c < spec.in_channels; ++c) {
        const float* plane = input.raw() + c * height * width;
        const float* w = weights.raw() + c * taps;
        float* dst = out.raw() + c * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                float acc = 0.0f;
                for (std::size_t ky = 0; ky < spec.kernel_h; ++ky) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * stride - pad +
                                              static_cast<std::ptrdiff_t>(ky);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height)) continue;
                    const float* srow = plane + static_cast<std::size_t>(iy) * width;
                    for (std::size_t kx = 0; kx < spec.kernel_w; ++kx) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * stride - pad +
                                                  static_cast<std::ptrdiff_t>(kx);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(width)) continue;
                        acc += w[ky * spec.kernel_w + kx] * srow[static_cast<std::size_t>(ix)];
                    }
                }
                dst[oy * ow + ox] = acc;
            }
        }
    }
}

}  // namespace

void ConvSpec::validate() const {
    if (out_channels == 0 || in_channels == 0 || kernel_h == 0 || kernel_w == 0 || stride == 0 ||
        groups == 0)
        throw ShapeError("conv spec: channels, kernel, stride and groups must be positive");
    if (in_channels % groups != 0)
        throw ShapeError("conv spec: in_channels " + std::to_string(in_channels) +
                         " not divisible by groups " + std::to_string(groups));
    if (out_channels % groups != 0)
        throw ShapeError("conv spec: out_channels " + std::to_string(out_channels) +
                         " not divisible by groups " + std::to_string(groups));
}

std::size_t ConvSpec::output_extent(std::size_t input, std::size_t kernel) const {
    if (input + 2 * padding < kernel)
        throw ShapeError("conv: input extent " + std::to_string(input) + " smaller than kernel " +
                         std::to_string(kernel));
    return (input + 2 * padding - kernel) / stride + 1;
}

MacCount ConvSpec::macs(std::size_t height, std::size_t width) const {
    validate();
    const std::uint64_t oh = output_extent(height, kernel_h);
    const std::uint64_t ow = output_extent(width, kernel_w);
    return {static_cast<std::uint64_t>(out_channels) * oh * ow * (in_channels / groups) * kernel_h *
            kernel_w};
}

ConvResult conv2d(const Tensor& input, const Tensor& weights, std::span<const float> bias,
                  const ConvSpec& spec) {
    spec.validate();
    if (input.rank() != 3) shape_mismatch("conv input rank", 3, input.rank());
    if (input.dim(0) != spec.in_channels)
        shape_mismatch("conv input channels", spec.in_channels, input.dim(0));
    const auto wshape = spec.weight_shape();
    if (weights.rank() != 4) shape_mismatch("conv weight rank", 4, weights.rank());
    static constexpr const char* kWeightDims[] = {"conv weight out_channels",
                                                  "conv weight in_channels/groups",
                                                  "conv weight kernel_h", "conv weight kernel_w"};
    for (std::size_t i = 0; i < 4; ++i)
        if (weights.dim(i) != wshape[i]) shape_mismatch(kWeightDims[i], wshape[i], weights.dim(i));
    if (!bias.empty() && bias.size() != spec.out_channels)
        shape_mismatch("conv bias length", spec.out_channels, bias.size());

    const std::size_t height = input.dim(1), width = input.dim(2);
    const std::size_t oh = spec.output_extent(height, spec.kernel_h);
    const std::size_t ow = spec.output_extent(width, spec.kernel_w);
    ConvResult result{Tensor({spec.out_channels, oh, ow}), spec.macs(height, width)};
    Tensor& out = result.output;

    if (spec.depthwise() && spec.out_channels == spec.in_channels) {
        depthwise(input, weights, spec, oh, ow, out);
    } else {
        const std::size_t cin_g = spec.in_channels / spec.groups;
        const std::size_t cout_g = spec.out_channels / spec.groups;
        const std::size_t kdim = cin_g * spec.kernel_h * spec.kernel_w;
        const bool pointwise = spec.kernel_h == 1 && spec.kernel_w == 1 && spec.stride == 1 &&
                               spec.padding == 0;
        std::vector<float> col(pointwise ? 0 : kdim * oh * ow);
        for (std::size_t g = 0; g < spec.groups; ++g) {
            const float* src = input.raw() + g * cin_g * height * width;
            if (!pointwise) {
                im2col(src, height, width, cin_g, spec, oh, ow, col.data());
                src = col.data();
            }
            gemm(weights.raw() + g * cout_g * kdim, src, out.raw() + g * cout_g * oh * ow, cout_g,
                 kdim, oh * ow);
        }
    }
    if (!bias.empty()) {
        for (std::size_t c = 0; c < spec.out_channels; ++c) {
            float* dst = out.raw() + c * oh * ow;
            const float b = bias[c];
            for (std::size_t i = 0; i < oh * ow; ++i) dst[i] += b;
        }
    }
    return result;
}

std::pair<Tensor, Tensor> fold_batchnorm(const Tensor& conv_weights,
                                         std::span<const float> conv_bias,
                                         std::span<const float> gamma,
                                         std::span<const float> beta,
                                         std::span<const float> running_mean,
                                         std::span<const float> running_var, double epsilon) {
    if (conv_weights.rank() == 0) throw ShapeError("fold_batchnorm: weights must have rank >= 1");
    const std::size_t channels = conv_weights.dim(0);
    if (!conv_bias.empty() && conv_bias.size() != channels)
        shape_mismatch("fold_batchnorm conv bias length", channels, conv_bias.size());
    if (gamma.size() != channels) shape_mismatch("fold_batchnorm gamma length", channels, gamma.size());
    if (beta.size() != channels) shape_mismatch("fold_batchnorm beta length", channels, beta.size());
    if (running_mean.size() != channels)
        shape_mismatch("fold_batchnorm running_mean length", channels, running_mean.size());
    if (running_var.size() != channels)
        shape_mismatch("fold_batchnorm running_var length", channels, running_var.size());
    if (!(epsilon >= 0.0)) throw DomainError("fold_batchnorm: epsilon must be nonnegative");

    Tensor weights = conv_weights;
    Tensor bias({channels});
    const std::size_t per_channel = channels ? conv_weights.size() / channels : 0;
    for (std::size_t c = 0; c < channels; ++c) {
        if (!(running_var[c] >= 0.0f))
            throw DomainError("fold_batchnorm: negative running variance at channel " +
                              std::to_string(c));
        const double denom = std::sqrt(static_cast<double>(running_var[c]) + epsilon);
        if (denom == 0.0)
            throw DomainError("fold_batchnorm: zero variance with zero epsilon at channel " +
                              std::to_string(c));
        const double scale = static_cast<double>(gamma[c]) / denom;
        float* w = weights.raw() + c * per_channel;
        for (std::size_t i = 0; i < per_channel; ++i)
            w[i] = static_cast<float>(static_cast<double>(w[i]) * scale);
        const double b = conv_bias.empty() ? 0.0 : static_cast<double>(conv_bias[c]);
        bias[c] = static_cast<float>((b - running_mean[c]) * scale + beta[c]);
    }
    return {std::move(weights), std::move(bias)};
}

Tensor batchnorm(const Tensor& x, std::span<const float> gamma, std::span<const float> beta,
                 std::span<const float> running_mean, std::span<const float> running_var,
                 double epsilon) {
    if (x.rank() != 3) shape_mismatch("batchnorm input rank", 3, x.rank());
    const std::size_t channels = x.dim(0);
    if (gamma.size() != channels || beta.size() != channels || running_mean.size() != channels ||
        running_var.size() != channels)
        throw ShapeError("batchnorm: per-channel vectors must have length " +
                         std::to_string(channels));
    Tensor out = x;
    const std::size_t plane = x.dim(1) * x.dim(2);
    for (std::size_t c = 0; c < channels; ++c) {
        if (running_var[c] < 0.0f) throw DomainError("batchnorm: negative running variance");
        const double inv = 1.0 / std::sqrt(static_cast<double>(running_var[c]) + epsilon);
        float* p = out.raw() + c * plane;
        for (std::size_t i = 0; i < plane; ++i)
            p[i] = static_cast<float>((p[i] - running_mean[c]) * inv * gamma[c] + beta[c]);
    }
    return out;
}

Activation parse_activation(std::string_view name) {
    if (name == "identity") return Activation::identity;
    if (name == "relu") return Activation::relu;
    if (name == "relu6") return Activation::relu6;
    if (name == "hard_sigmoid") return Activation::hard_sigmoid;
    if (name == "hard_swish") return Activation::hard_swish;
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "softmax") return Activation::softmax;
    throw UsageError("unknown activation: " + std::string(name));
}

std::string_view activation_name(Activation kind) {
    switch (kind) {
        case Activation::identity: return "identity";
        case Activation::relu: return "relu";
        case Activation::relu6: return "relu6";
        case Activation::hard_sigmoid: return "hard_sigmoid";
        case Activation::hard_swish: return "hard_swish";
        case Activation::sigmoid: return "sigmoid";
        case Activation::softmax: return "softmax";
    }
    return "?";
}

float apply_scalar(Activation kind, float x) {
    switch (kind) {
        case Activation::identity: return x;
        case Activation::relu: return x > 0.0f ? x : 0.0f;
        case Activation::relu6: return std::min(std::max(x, 0.0f), 6.0f);
        case Activation::hard_sigmoid: return std::min(std::max(x + 3.0f, 0.0f), 6.0f) / 6.0f;
        case Activation::hard_swish: return x * std::min(std::max(x + 3.0f, 0.0f), 6.0f) / 6.0f;
        case Activation::sigmoid:
            // split on sign so exp never overflows
            if (x >= 0.0f) return 1.0f / (1.0f + std::exp(-x));
            else {
                const float e = std::exp(x);
                return e / (1.0f + e);
            }
        case Activation::softmax:
            throw UsageError("softmax is not an elementwise activation");
    }
    return x;
}

void activate_inplace(Activation kind, Tensor& x) {
    if (kind == Activation::identity) return;
    if (kind != Activation::softmax) {
        for (float& v : x.data()) v = apply_scalar(kind, v);
        return;
    }
    if (x.empty()) return;
    const std::size_t last = x.rank() == 0 ? 1 : x.shape().back();
    if (last == 0) return;
    for (std::size_t s = 0; s < x.size(); s += last) {
        float* row = x.raw() + s;
        const float peak = *std::max_element(row, row + last);
        float sum = 0.0f;
        for (std::size_t i = 0; i < last; ++i) {
            row[i] = std::exp(row[i] - peak);
            sum += row[i];
        }
        for (std::size_t i = 0; i < last; ++i) row[i] /= sum;
    }
}

Tensor activation(Activation kind, const Tensor& x) {
    Tensor out = x;
    activate_inplace(kind, out);
    return out;
}

Tensor global_avg_pool(const Tensor& x) {
    if (x.rank() != 3) shape_mismatch("global_avg_pool input rank", 3, x.rank());
    const std::size_t channels = x.dim(0), plane = x.dim(1) * x.dim(2);
    if (plane == 0) throw ShapeError("global_avg_pool: empty plane");
    Tensor out({channels, 1, 1});
    for (std::size_t c = 0; c < channels; ++c) {
        const float* p = x.raw() + c * plane;
        float sum = 0.0f;
        for (std::size_t i = 0; i < plane; ++i) sum += p[i];
        out[c] = sum / static_cast<float>(plane);
    }
    return out;
}

std::size_t PoolSpec::output_extent(std::size_t input) const {
    if (kernel == 0 || stride == 0) throw ShapeError("pool: kernel and stride must be positive");
    if (input + 2 * padding < kernel) throw ShapeError("pool: input smaller than window");
    return (input + 2 * padding - kernel) / stride + 1;
}

Tensor max_pool2d(const Tensor& x, const PoolSpec& spec) {
    if (x.rank() != 3) shape_mismatch("max_pool2d input rank", 3, x.rank());
    const std::size_t channels = x.dim(0), height = x.dim(1), width = x.dim(2);
    const std::size_t oh = spec.output_extent(height), ow = spec.output_extent(width);
    Tensor out({channels, oh, ow});
    const auto pad = static_cast<std::ptrdiff_t>(spec.padding);
    for (std::size_t c = 0; c < channels; ++c) {
        const float* plane = x.raw() + c * height * width;
        for (std::size_t oy = 0; oy < oh; ++oy) {
            const std::ptrdiff_t y0 = static_cast<std::ptrdiff_t>(oy * spec.stride) - pad;
            for (std::size_t ox = 0; ox < ow; ++ox) {
                const std::ptrdiff_t x0 = static_cast<std::ptrdiff_t>(ox * spec.stride) - pad;
                float best = -std::numeric_limits<float>::infinity();
                for (std::ptrdiff_t y = std::max<std::ptrdiff_t>(y0, 0);
                     y < std::min<std::ptrdiff_t>(y0 + static_cast<std::ptrdiff_t>(spec.kernel),
                                                  static_cast<std::ptrdiff_t>(height));
                     ++y)
                    for (std::ptrdiff_t xx = std::max<std::ptrdiff_t>(x0, 0);
                         xx < std::min<std::ptrdiff_t>(x0 + static_cast<std::ptrdiff_t>(spec.kernel),
                                                       static_cast<std::ptrdiff_t>(width));
                         ++xx)
                        best = std::max(best, plane[static_cast<std::size_t>(y) * width +
                                                    static_cast<std::size_t>(xx)]);
                out.at(c, oy, ox) = best;
            }
        }
    }
    return out;
}

LinearResult linear(const Tensor& x, const Tensor& weights, std::span<const float> bias) {
    if (weights.rank() != 2) shape_mismatch("linear weight rank", 2, weights.rank());
    const std::size_t m = weights.dim(0), n = weights.dim(1);
    if (x.size() != n) shape_mismatch("linear input length", n, x.size());
    if (!bias.empty() && bias.size() != m) shape_mismatch("linear bias length", m, bias.size());
    Tensor y({m});
    for (std::size_t i = 0; i < m; ++i) {
        const float* w = weights.raw() + i * n;
        float acc = 0.0f;
        for (std::size_t j = 0; j < n; ++j) acc += w[j] * x[j];
        y[i] = bias.empty() ? acc : acc + bias[i];
    }
    return {std::move(y), MacCount{static_cast<std::uint64_t>(m) * n}};
}

void add_inplace(Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeError("add: shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
    float* pa = a.raw();
    const float* pb = b.raw();
    for (std::size_t i = 0; i < a.size(); ++i) pa[i] += pb[i];
}

void scale_channels_inplace(Tensor& x, std::span<const float> scale) {
    if (x.rank() != 3) shape_mismatch("scale_channels input rank", 3, x.rank());
    if (scale.size() != x.dim(0)) shape_mismatch("scale_channels length", x.dim(0), scale.size());
    const std::size_t plane = x.dim(1) * x.dim(2);
    for (std::size_t c = 0; c < scale.size(); ++c) {
        float* p = x.raw() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) p[i] *= scale[c];
    }
}

}  // namespace oralnet
