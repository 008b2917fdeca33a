#pragma once

// Independent reference implementations used as test oracles. Deliberately
// naive: direct loops in double, no shared code with the library kernels.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "oralnet/kernels.hpp"
#include "oralnet/tensor.hpp"

namespace oracle {

using oralnet::ConvSpec;
using oralnet::Tensor;

inline Tensor random_tensor(const Tensor::Shape& shape, std::mt19937_64& rng, float lo = -1.0f,
                            float hi = 1.0f) {
    std::uniform_real_distribution<float> d(lo, hi);
    Tensor t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = d(rng);
    return t;
}

inline std::vector<float> random_vector(std::size_t n, std::mt19937_64& rng, float lo, float hi) {
    std::uniform_real_distribution<float> d(lo, hi);
    std::vector<float> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

/// Direct grouped cross-correlation in double.
inline std::vector<double> conv2d(const Tensor& x, const Tensor& w, const std::vector<float>& bias,
                                  const ConvSpec& s) {
    const std::size_t H = x.dim(1), W = x.dim(2);
    const std::size_t oh = (H + 2 * s.padding - s.kernel_h) / s.stride + 1;
    const std::size_t ow = (W + 2 * s.padding - s.kernel_w) / s.stride + 1;
    const std::size_t cin_g = s.in_channels / s.groups, cout_g = s.out_channels / s.groups;
    std::vector<double> out(s.out_channels * oh * ow, 0.0);
    for (std::size_t oc = 0; oc < s.out_channels; ++oc) {
        const std::size_t g = oc / cout_g;
        for (std::size_t oy = 0; oy < oh; ++oy)
            for (std::size_t ox = 0; ox < ow; ++ox) {
                double acc = bias.empty() ? 0.0 : bias[oc];
                for (std::size_t ic = 0; ic < cin_g; ++ic)
                    for (std::size_t ky = 0; ky < s.kernel_h; ++ky)
                        for (std::size_t kx = 0; kx < s.kernel_w; ++kx) {
                            const long iy = static_cast<long>(oy * s.stride + ky) - static_cast<long>(s.padding);
                            const long ix = static_cast<long>(ox * s.stride + kx) - static_cast<long>(s.padding);
                            if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W))
                                continue;
                            const double xv = x[((g * cin_g + ic) * H + static_cast<std::size_t>(iy)) * W +
                                                static_cast<std::size_t>(ix)];
                            const double wv = w[((oc * cin_g + ic) * s.kernel_h + ky) * s.kernel_w + kx];
                            acc += xv * wv;
                        }
                out[(oc * oh + oy) * ow + ox] = acc;
            }
    }
    return out;
}

/// Conv followed by explicit normalization, the two-pass form folding replaces.
inline std::vector<double> conv_then_bn(const Tensor& x, const Tensor& w, const std::vector<float>& bias,
                                        const ConvSpec& s, const std::vector<float>& gamma,
                                        const std::vector<float>& beta, const std::vector<float>& mean,
                                        const std::vector<float>& var, double eps) {
    auto y = conv2d(x, w, bias, s);
    const std::size_t plane = y.size() / s.out_channels;
    for (std::size_t c = 0; c < s.out_channels; ++c)
        for (std::size_t i = 0; i < plane; ++i) {
            double& v = y[c * plane + i];
            v = gamma[c] * (v - mean[c]) / std::sqrt(static_cast<double>(var[c]) + eps) + beta[c];
        }
    return y;
}

/// Binary cross-entropy written out term by term: -(1/N) sum y log p + (1-y) log(1-p).
inline double bce(const std::vector<double>& y, const std::vector<double>& p, double base) {
    long double acc = 0.0L;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const long double pi = std::clamp(p[i], 1e-7, 1.0 - 1e-7);
        acc += static_cast<long double>(y[i]) * std::log(pi) +
               (1.0L - static_cast<long double>(y[i])) * std::log(1.0L - pi);
    }
    return static_cast<double>(-acc / static_cast<long double>(y.size()) / std::log(static_cast<long double>(base)));
}

}  // namespace oracle
