#include "lisaliency/maps.hpp"

#include <algorithm>
#include <cmath>

namespace lisaliency {

Tensor as_chw(const Tensor& t) {
  if (t.rank() == 1) return t.reshaped({t.size(), 1, 1});
  if (t.rank() == 3) return t;
  throw Error(ErrorCode::kShapeMismatch,
              "expected a (C,H,W) or (N) tensor, got " + shape_string(t.shape()));
}

namespace {

template <typename Reduce>
Tensor reduce_channels(const Tensor& input, Reduce reduce) {
  const Tensor t = as_chw(input);
  const std::size_t channels = t.dim(0), plane = t.dim(1) * t.dim(2);
  Tensor out({t.dim(1), t.dim(2)});
  std::copy(t.data(), t.data() + plane, out.data());
  for (std::size_t c = 1; c < channels; ++c) {
    const float* src = t.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) out[i] = reduce(out[i], src[i]);
  }
  return out;
}

}  // namespace

Tensor channel_max(const Tensor& t) {
  return reduce_channels(t, [](float a, float b) { return std::max(a, b); });
}

Tensor channel_sum(const Tensor& input) {
  const Tensor t = as_chw(input);
  const std::size_t channels = t.dim(0), plane = t.dim(1) * t.dim(2);
  Tensor out({t.dim(1), t.dim(2)});
  for (std::size_t i = 0; i < plane; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) acc += t[c * plane + i];
    out[i] = static_cast<float>(acc);
  }
  return out;
}

double l2_norm(const Tensor& t) {
  double acc = 0.0;
  for (float v : t.values()) acc += static_cast<double>(v) * v;
  return std::sqrt(acc);
}

NormalizedMap normalize_l2(const Tensor& map) {
  const double norm = l2_norm(map);
  if (norm < kDegenerateNorm) return {map, true};
  NormalizedMap out{map, false};
  for (float& v : out.values.values()) v = static_cast<float>(v / norm);
  return out;
}

Tensor resize_bilinear(const Tensor& map, std::size_t out_h, std::size_t out_w) {
  if (map.rank() != 2) {
    throw Error(ErrorCode::kShapeMismatch, "resize_bilinear needs an (H,W) map, got " +
                                               shape_string(map.shape()));
  }
  if (out_h == 0 || out_w == 0) {
    throw Error(ErrorCode::kInvalidArgument, "resize_bilinear target must be at least 1x1");
  }
  const std::size_t in_h = map.dim(0), in_w = map.dim(1);
  Tensor out({out_h, out_w});
  auto source = [](std::size_t i, std::size_t in, std::size_t n) {
    if (n == 1 || in == 1) return 0.0;
    return static_cast<double>(i) * static_cast<double>(in - 1) / static_cast<double>(n - 1);
  };
  for (std::size_t y = 0; y < out_h; ++y) {
    const double sy = source(y, in_h, out_h);
    const std::size_t y0 = std::min(static_cast<std::size_t>(sy), in_h - 1);
    const std::size_t y1 = std::min(y0 + 1, in_h - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double sx = source(x, in_w, out_w);
      const std::size_t x0 = std::min(static_cast<std::size_t>(sx), in_w - 1);
      const std::size_t x1 = std::min(x0 + 1, in_w - 1);
      const double fx = sx - static_cast<double>(x0);
      const double top = map.at(y0, x0) * (1.0 - fx) + map.at(y0, x1) * fx;
      const double bottom = map.at(y1, x0) * (1.0 - fx) + map.at(y1, x1) * fx;
      out.at(y, x) = static_cast<float>(top * (1.0 - fy) + bottom * fy);
    }
  }
  return out;
}

}  // namespace lisaliency
