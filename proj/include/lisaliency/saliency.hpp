#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lisaliency/lateral_inhibition.hpp"
#include "lisaliency/maps.hpp"
#include "lisaliency/network.hpp"

namespace lisaliency {

struct SaliencyConfig {
  LIParams li;
  TapPoint tap = TapPoint::kAfterSoftmax;
  LiSource li_source = LiSource::kGradient;
  // Skip fully-connected ReLUs when fusing layer maps; their 1x1 maps only
  // add a constant offset.
  bool spatial_layers_only = true;
  // Number of top predicted categories fused into a saliency map.
  std::size_t top_k = 5;
};

/// Category-specific map at input resolution. Unit L2 norm unless degenerate.
struct AttentionMap {
  Tensor values;
  std::size_t category = 0;
  TapPoint tap = TapPoint::kAfterSoftmax;
  LiSource li_source = LiSource::kGradient;
  bool degenerate = false;
};

/// Sum of the top-k attention maps, renormalized.
struct SaliencyMap {
  Tensor values;
  std::vector<std::size_t> categories;
  bool degenerate = false;
};

inline Tensor sum_c(const Tensor& t) { return channel_sum(t); }

// Second forward pass that zeroes every channel at each location where the
// layer's mask is 0. Returns the masked ReLU outputs in forward order.
std::vector<Tensor> masked_forward(const NetworkSpec& spec, const NetworkWeights& weights,
                                   const Tensor& image, const SuppressionMaskSet& masks);

// Sum-C of each ReLU output, L2-normalized per layer, resized to
// (out_h, out_w), summed and L2-normalized again.
NormalizedMap fuse_layer_maps(std::span<const Tensor> relu_outputs, std::size_t out_h,
                              std::size_t out_w, bool spatial_layers_only);

AttentionMap attention_map(const NetworkSpec& spec, const NetworkWeights& weights,
                           const Tensor& image, std::size_t category,
                           const SaliencyConfig& config = {});

// Same, reusing an existing traced forward pass of `image`.
AttentionMap attention_map(const NetworkSpec& spec, const NetworkWeights& weights,
                           const Tensor& image, const ActivationTrace& trace,
                           std::size_t category, const SaliencyConfig& config = {});

SaliencyMap fuse_attention_maps(std::span<const AttentionMap> maps);

SaliencyMap saliency_map(const NetworkSpec& spec, const NetworkWeights& weights,
                         const Tensor& image, const SaliencyConfig& config = {});

}  // namespace lisaliency
