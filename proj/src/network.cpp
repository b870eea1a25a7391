#include "lisaliency/network.hpp"

#include <algorithm>
#include <numeric>

namespace lisaliency {

std::string_view to_string(TapPoint tap) {
  return tap == TapPoint::kBeforeSoftmax ? "before" : "after";
}

TapPoint parse_tap_point(std::string_view s) {
  if (s == "before" || s == "before_softmax") return TapPoint::kBeforeSoftmax;
  if (s == "after" || s == "after_softmax") return TapPoint::kAfterSoftmax;
  throw Error(ErrorCode::kInvalidArgument, "tap must be 'before' or 'after', got '" + std::string(s) + "'");
}

namespace {

void check_image(const NetworkSpec& spec, const Tensor& image) {
  if (image.shape() != spec.input_shape) {
    throw Error(ErrorCode::kShapeMismatch, "image shape " + shape_string(image.shape()) +
                                               " does not match network input " +
                                               shape_string(spec.input_shape));
  }
}

}  // namespace

ForwardResult forward(const NetworkSpec& spec, const NetworkWeights& weights,
                      const Tensor& image, const ReluHook& hook) {
  check_image(spec, image);
  ForwardResult result;
  Tensor x = image;
  for (const LayerSpec& layer : spec.layers) {
    switch (layer.kind) {
      case LayerKind::kConv:
        x = conv2d(x, weights.at(weight_name(layer.name)), weights.at(bias_name(layer.name)),
                   {layer.stride, layer.padding});
        break;
      case LayerKind::kRelu:
        x = relu(x);
        if (hook) hook(result.relu_outputs.size(), x);
        result.relu_outputs.push_back(x);
        break;
      case LayerKind::kMaxPool:
        x = maxpool2d(x, layer.window, layer.stride);
        break;
      case LayerKind::kFlatten:
        x = std::move(x).reshaped({x.size()});
        break;
      case LayerKind::kFullyConnected:
        x = fully_connected(x, weights.at(weight_name(layer.name)), weights.at(bias_name(layer.name)));
        break;
      case LayerKind::kSoftmax:
        result.logits = x;
        x = softmax(x);
        break;
    }
  }
  result.probabilities = std::move(x);
  return result;
}

std::vector<std::size_t> top_k(const Tensor& probabilities, std::size_t k) {
  std::vector<std::size_t> order(probabilities.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return probabilities[a] > probabilities[b];
  });
  order.resize(std::min(k, order.size()));
  return order;
}

RecordedForward record_forward(GradientTape& tape, const NetworkSpec& spec,
                               const NetworkWeights& weights, const Tensor& image,
                               bool parameters_require_grad) {
  check_image(spec, image);
  RecordedForward rec;
  rec.parameters.resize(weights.entries().size());
  auto param = [&](const std::string& name) {
    const auto entries = weights.entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].first == name) {
        rec.parameters[i] = tape.watch(entries[i].second, parameters_require_grad);
        return rec.parameters[i];
      }
    }
    throw Error(ErrorCode::kNotFound, "no parameter named '" + name + "'");
  };

  NodeId x = tape.input(image, /*requires_grad=*/false);
  for (const LayerSpec& layer : spec.layers) {
    switch (layer.kind) {
      case LayerKind::kConv: {
        const NodeId w = param(weight_name(layer.name));
        const NodeId b = param(bias_name(layer.name));
        x = tape.conv2d(x, w, b, {layer.stride, layer.padding});
        break;
      }
      case LayerKind::kRelu:
        x = tape.relu(x);
        rec.relus.push_back(x);
        break;
      case LayerKind::kMaxPool:
        x = tape.maxpool2d(x, layer.window, layer.stride);
        break;
      case LayerKind::kFlatten:
        x = tape.flatten(x);
        break;
      case LayerKind::kFullyConnected: {
        const NodeId w = param(weight_name(layer.name));
        const NodeId b = param(bias_name(layer.name));
        x = tape.fully_connected(x, w, b);
        break;
      }
      case LayerKind::kSoftmax:
        rec.logits = x;
        x = tape.softmax(x);
        break;
    }
  }
  rec.probabilities = x;
  return rec;
}

ActivationTrace forward_traced(const NetworkSpec& spec, const NetworkWeights& weights,
                               const Tensor& image) {
  auto tape = std::make_shared<GradientTape>();
  const RecordedForward rec = record_forward(*tape, spec, weights, image, false);
  const auto names = relu_layers(spec);
  ActivationTrace trace;
  trace.relu_nodes_ = rec.relus;
  for (std::size_t i = 0; i < rec.relus.size(); ++i) {
    trace.relus_.push_back({names[i], tape->value(rec.relus[i]), Tensor()});
  }
  trace.logits_node_ = rec.logits;
  trace.probabilities_node_ = rec.probabilities;
  trace.logits_ = tape->value(rec.logits);
  trace.probabilities_ = tape->value(rec.probabilities);
  trace.tape_ = std::move(tape);
  return trace;
}

ActivationTrace backprop_category(const ActivationTrace& trace, std::size_t class_index,
                                  TapPoint tap) {
  if (trace.consumed()) {
    throw Error(ErrorCode::kState, "activation trace already consumed (tape released)");
  }
  if (class_index >= trace.probabilities_.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "class index " + std::to_string(class_index) + " out of range for " +
                    std::to_string(trace.probabilities_.size()) + " classes");
  }
  const NodeId score_source =
      tap == TapPoint::kBeforeSoftmax ? trace.logits_node_ : trace.probabilities_node_;
  // Selecting one element of the output and seeding it with 1 is the same as
  // seeding the output with a one-hot vector.
  Tensor seed(trace.tape_->value(score_source).shape());
  seed[class_index] = 1.0f;
  Gradients grads = trace.tape_->backward_with(score_source, std::move(seed));

  ActivationTrace out = trace;
  for (std::size_t i = 0; i < out.relus_.size(); ++i) {
    out.relus_[i].gradient = grads.has(out.relu_nodes_[i])
                                 ? grads.take(out.relu_nodes_[i])
                                 : Tensor(out.relus_[i].activation.shape(), 0.0f);
    require_finite(out.relus_[i].gradient, "backprop_category");
  }
  out.category_ = class_index;
  out.tap_ = tap;
  return out;
}

}  // namespace lisaliency
