#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lisaliency/error.hpp"

namespace lisaliency {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major float32 array. A default-constructed tensor is empty
/// (rank 0, no storage); every other tensor has strictly positive dims.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> values);

  static Tensor scalar(float value) { return Tensor({1}, value); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<float> values() noexcept { return data_; }
  std::span<const float> values() const noexcept { return data_; }
  float* data() noexcept { return data_.data(); }
  const float* data() const noexcept { return data_.data(); }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  // Unchecked multi-index accessors for rank-2 (h, w) and rank-3 (c, h, w).
  float& at(std::size_t h, std::size_t w) { return data_[h * shape_[1] + w]; }
  float at(std::size_t h, std::size_t w) const {
    return data_[h * shape_[1] + w];
  }
  float& at(std::size_t c, std::size_t h, std::size_t w) {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }
  float at(std::size_t c, std::size_t h, std::size_t w) const {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }

  Tensor reshaped(Shape shape) const&;
  Tensor reshaped(Shape shape) &&;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

// Throws Error(kNumeric) naming `where` if any value is NaN or infinite.
void require_finite(const Tensor& t, std::string_view where);

// Throws Error(kShapeMismatch) unless the shapes agree exactly.
void require_same_shape(const Tensor& a, const Tensor& b, std::string_view where);

// True if the two tensors have equal shape and bit-identical payloads.
bool bit_identical(const Tensor& a, const Tensor& b);

}  // namespace lisaliency
