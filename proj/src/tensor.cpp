#include "lisaliency/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace lisaliency {

std::size_t shape_size(const Shape& shape) {
  if (shape.empty()) return 0;
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

namespace {

void validate_shape(const Shape& shape) {
  if (shape.empty()) {
    throw Error(ErrorCode::kShapeMismatch, "tensor shape must have rank >= 1");
  }
  for (std::size_t d : shape) {
    if (d == 0) {
      throw Error(ErrorCode::kShapeMismatch,
                  "tensor dims must be positive, got " + shape_string(shape));
    }
  }
}

}  // namespace

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)) {
  validate_shape(shape_);
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  validate_shape(shape_);
  if (shape_size(shape_) != data_.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "shape " + shape_string(shape_) + " needs " +
                    std::to_string(shape_size(shape_)) + " values, got " +
                    std::to_string(data_.size()));
  }
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "axis " + std::to_string(axis) + " out of range for shape " +
                    shape_string(shape_));
  }
  return shape_[axis];
}

Tensor Tensor::reshaped(Shape shape) const& {
  Tensor copy = *this;
  return std::move(copy).reshaped(std::move(shape));
}

Tensor Tensor::reshaped(Shape shape) && {
  validate_shape(shape);
  if (shape_size(shape) != data_.size()) {
    throw Error(ErrorCode::kShapeMismatch, "cannot reshape " +
                                               shape_string(shape_) + " to " +
                                               shape_string(shape));
  }
  shape_ = std::move(shape);
  return std::move(*this);
}

void require_finite(const Tensor& t, std::string_view where) {
  for (float v : t.values()) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kNumeric,
                  "non-finite value produced by " + std::string(where));
    }
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, std::string_view where) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorCode::kShapeMismatch,
                std::string(where) + ": shape " + shape_string(a.shape()) +
                    " does not match " + shape_string(b.shape()));
  }
}

bool bit_identical(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         (a.size() == 0 ||
          std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
}

}  // namespace lisaliency
