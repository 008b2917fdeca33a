#include "oralnet/tensor.hpp"

#include <cmath>
#include <sstream>

#include "oralnet/errors.hpp"

namespace oralnet {

std::size_t shape_elements(const Tensor::Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_string(const Tensor::Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace {

void check_rank(const Tensor::Shape& shape) {
    if (shape.size() > kMaxRank)
        throw ShapeError("tensor rank " + std::to_string(shape.size()) + " exceeds " +
                         std::to_string(kMaxRank));
}

}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
    check_rank(shape_);
    data_.assign(shape_elements(shape_), 0.0f);
}

Tensor::Tensor(Shape shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    check_rank(shape_);
    if (shape_elements(shape_) != data_.size())
        throw ShapeError("shape " + shape_string(shape_) + " needs " +
                         std::to_string(shape_elements(shape_)) + " elements, got " +
                         std::to_string(data_.size()));
}

Tensor Tensor::filled(Shape shape, float value) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
}

Tensor Tensor::vector(std::vector<float> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size())
        throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_string(shape_));
    return shape_[axis];
}

float& Tensor::at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
}

float Tensor::at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_elements(shape) != data_.size())
        throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const noexcept {
    for (float v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace oralnet
