#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace oralnet {

inline constexpr std::size_t kMaxRank = 4;

/// Dense float32 array of rank 0..4, row-major. Images are channels-first
/// (C x H x W). A rank-0 tensor holds exactly one element.
class Tensor {
public:
    using Shape = std::vector<std::size_t>;

    Tensor() : shape_{0}, data_{} {}
    explicit Tensor(Shape shape);
    Tensor(Shape shape, std::vector<float> data);
    Tensor(Shape shape, std::initializer_list<float> values)
        : Tensor(std::move(shape), std::vector<float>(values)) {}

    static Tensor filled(Shape shape, float value);
    static Tensor vector(std::vector<float> values);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }
    float* raw() noexcept { return data_.data(); }
    const float* raw() const noexcept { return data_.data(); }

    float& operator[](std::size_t i) { return data_[i]; }
    float operator[](std::size_t i) const { return data_[i]; }

    // C x H x W element access
    float& at(std::size_t c, std::size_t y, std::size_t x);
    float at(std::size_t c, std::size_t y, std::size_t x) const;

    /// Same data, new shape; the element count must not change.
    Tensor reshaped(Shape shape) const;

    bool all_finite() const noexcept;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<float> data_;
};

std::size_t shape_elements(const Tensor::Shape& shape);
std::string shape_string(const Tensor::Shape& shape);

}  // namespace oralnet
