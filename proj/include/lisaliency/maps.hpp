#pragma once

#include <cstddef>

#include "lisaliency/tensor.hpp"

namespace lisaliency {

// Views a rank-1 (N) activation as (N, 1, 1); rank-3 tensors pass through.
Tensor as_chw(const Tensor& t);

// out[h, w] = max_c in[c, h, w]. Rank-1 inputs are treated as (N, 1, 1).
Tensor channel_max(const Tensor& t);
// out[h, w] = sum_c in[c, h, w]. Rank-1 inputs are treated as (N, 1, 1).
Tensor channel_sum(const Tensor& t);

struct NormalizedMap {
  Tensor values;
  bool degenerate = false;  // norm below 1e-12; values returned unchanged
};

inline constexpr double kDegenerateNorm = 1e-12;

double l2_norm(const Tensor& t);
NormalizedMap normalize_l2(const Tensor& map);

// Corner-aligned bilinear resize of an (H, W) map.
Tensor resize_bilinear(const Tensor& map, std::size_t out_h, std::size_t out_w);

}  // namespace lisaliency
