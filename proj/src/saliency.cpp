#include "lisaliency/saliency.hpp"

namespace lisaliency {

std::vector<Tensor> masked_forward(const NetworkSpec& spec, const NetworkWeights& weights,
                                   const Tensor& image, const SuppressionMaskSet& masks) {
  const std::vector<std::string> names = relu_layers(spec);
  std::vector<const Tensor*> by_index;
  for (const auto& name : names) {
    if (!masks.contains(name)) {
      throw Error(ErrorCode::kNotFound, "masked_forward: no suppression mask for layer " + name);
    }
    by_index.push_back(&masks.at(name));
  }
  ReluHook erase = [&](std::size_t index, Tensor& activation) {
    const Tensor& mask = *by_index[index];
    const std::size_t plane = activation.rank() == 3 ? activation.dim(1) * activation.dim(2) : 1;
    if (mask.size() != plane) {
      throw Error(ErrorCode::kShapeMismatch, "mask for layer " + names[index] + " has shape " +
                                                 shape_string(mask.shape()));
    }
    const std::size_t channels = activation.size() / plane;
    for (std::size_t c = 0; c < channels; ++c) {
      float* dst = activation.data() + c * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        if (mask[i] == 0.0f) dst[i] = 0.0f;
      }
    }
  };
  return forward(spec, weights, image, erase).relu_outputs;
}

NormalizedMap fuse_layer_maps(std::span<const Tensor> relu_outputs, std::size_t out_h,
                              std::size_t out_w, bool spatial_layers_only) {
  Tensor total({out_h, out_w}, 0.0f);
  for (const Tensor& activation : relu_outputs) {
    if (spatial_layers_only && activation.rank() != 3) continue;
    const NormalizedMap layer = normalize_l2(sum_c(activation));
    const Tensor resized = resize_bilinear(layer.values, out_h, out_w);
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += resized[i];
  }
  return normalize_l2(total);
}

AttentionMap attention_map(const NetworkSpec& spec, const NetworkWeights& weights,
                           const Tensor& image, std::size_t category,
                           const SaliencyConfig& config) {
  const ActivationTrace trace = forward_traced(spec, weights, image);
  return attention_map(spec, weights, image, trace, category, config);
}

AttentionMap attention_map(const NetworkSpec& spec, const NetworkWeights& weights,
                           const Tensor& image, const ActivationTrace& trace,
                           std::size_t category, const SaliencyConfig& config) {
  const ActivationTrace with_grads = backprop_category(trace, category, config.tap);
  const SuppressionMaskSet masks =
      build_suppression_masks(with_grads, config.li, config.li_source);
  const std::vector<Tensor> masked = masked_forward(spec, weights, image, masks);
  NormalizedMap fused = fuse_layer_maps(masked, spec.input_shape[1], spec.input_shape[2],
                                        config.spatial_layers_only);
  return {std::move(fused.values), category, config.tap, config.li_source, fused.degenerate};
}

SaliencyMap fuse_attention_maps(std::span<const AttentionMap> maps) {
  if (maps.empty()) throw Error(ErrorCode::kInvalidArgument, "no attention maps to fuse");
  Tensor total(maps.front().values.shape(), 0.0f);
  SaliencyMap out;
  for (const AttentionMap& m : maps) {
    require_same_shape(total, m.values, "fuse_attention_maps");
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += m.values[i];
    out.categories.push_back(m.category);
  }
  NormalizedMap fused = normalize_l2(total);
  out.values = std::move(fused.values);
  out.degenerate = fused.degenerate;
  return out;
}

SaliencyMap saliency_map(const NetworkSpec& spec, const NetworkWeights& weights,
                         const Tensor& image, const SaliencyConfig& config) {
  if (config.top_k == 0) throw Error(ErrorCode::kInvalidArgument, "saliency top_k must be positive");
  const ActivationTrace trace = forward_traced(spec, weights, image);
  std::vector<AttentionMap> maps;
  for (std::size_t category : trace.top_classes(config.top_k)) {
    maps.push_back(attention_map(spec, weights, image, trace, category, config));
  }
  return fuse_attention_maps(maps);
}

}  // namespace lisaliency
