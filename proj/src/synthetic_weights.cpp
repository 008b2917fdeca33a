#include <cmath>

#include "oralnet/model.hpp"

namespace oralnet {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace

// Must stay in lockstep with synth() in tests/fixtures/generate_fixtures.py.
Tensor synthesize_tensor(const std::string& name, const Tensor::Shape& shape, std::uint64_t seed) {
    Tensor t(shape);
    const std::uint64_t base = fnv1a64(name) ^ mix64(seed);
    const bool is_var = name.ends_with("running_var");
    const bool is_mean = name.ends_with("running_mean");
    const bool is_weight = name.ends_with("weight");
    float scale = 0.0f;
    if (shape.size() == 4)
        scale = static_cast<float>(std::sqrt(6.0 / static_cast<double>(shape[1] * shape[2] * shape[3])));
    else if (shape.size() == 2)
        scale = static_cast<float>(std::sqrt(3.0 / static_cast<double>(shape[1])));

    for (std::size_t i = 0; i < t.size(); ++i) {
        const std::uint64_t z = mix64(base + (i + 1) * kGolden);
        const float u = static_cast<float>(z >> 40) * 0x1p-24f;
        const float sym = 2.0f * u - 1.0f;
        float v;
        if (is_var)
            v = 0.5f + u;
        else if (is_mean)
            v = 0.1f * sym;
        else if (shape.size() == 4 || shape.size() == 2)
            v = sym * scale;
        else if (is_weight)
            v = 0.5f + 0.5f * u;
        else
            v = 0.1f * sym;
        t[i] = v;
    }
    return t;
}

WeightStore synthesize_weights(Architecture arch, std::uint64_t seed, bool include_head) {
    WeightStore store;
    for (const auto& [name, shape] : required_tensors(arch, include_head))
        store.insert(name, synthesize_tensor(name, shape, seed));
    return store;
}

}  // namespace oralnet
