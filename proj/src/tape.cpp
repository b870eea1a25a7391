#include "lisaliency/tape.hpp"

namespace lisaliency {

namespace {

void accumulate(std::optional<Tensor>& slot, Tensor delta) {
  if (!slot) {
    slot = std::move(delta);
    return;
  }
  require_same_shape(*slot, delta, "gradient accumulation");
  for (std::size_t i = 0; i < delta.size(); ++i) (*slot)[i] += delta[i];
}

}  // namespace

const GradientTape::Node& GradientTape::node(NodeId id) const {
  if (id.index >= nodes_.size()) {
    throw Error(ErrorCode::kNotFound,
                "node " + std::to_string(id.index) + " is not on the tape");
  }
  return nodes_[id.index];
}

NodeId GradientTape::push(Node n) {
  nodes_.push_back(std::move(n));
  return NodeId{nodes_.size() - 1};
}

bool GradientTape::wants_grad(NodeId id) const {
  const Node& n = nodes_[id.index];
  return n.kind != Kind::kLeaf || n.requires_grad;
}

NodeId GradientTape::input(Tensor value, bool requires_grad) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

NodeId GradientTape::watch(const Tensor& value, bool requires_grad) {
  Node n;
  n.borrowed = &value;
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

NodeId GradientTape::conv2d(NodeId input, NodeId weights, NodeId bias,
                            Conv2dParams params) {
  Node n;
  n.kind = Kind::kConv2d;
  n.inputs = {input, weights, bias};
  n.input_count = 3;
  n.conv = params;
  n.owned = lisaliency::conv2d(value(input), value(weights), value(bias), params);
  return push(std::move(n));
}

NodeId GradientTape::relu(NodeId input) {
  Node n;
  n.kind = Kind::kRelu;
  n.inputs = {input};
  n.input_count = 1;
  n.owned = lisaliency::relu(value(input));
  return push(std::move(n));
}

NodeId GradientTape::maxpool2d(NodeId input, std::size_t window, std::size_t stride) {
  Node n;
  n.kind = Kind::kMaxPool;
  n.inputs = {input};
  n.input_count = 1;
  n.window = window;
  n.stride = stride;
  n.owned = lisaliency::maxpool2d(value(input), window, stride);
  return push(std::move(n));
}

NodeId GradientTape::flatten(NodeId input) {
  Node n;
  n.kind = Kind::kFlatten;
  n.inputs = {input};
  n.input_count = 1;
  n.owned = value(input).reshaped({value(input).size()});
  return push(std::move(n));
}

NodeId GradientTape::fully_connected(NodeId input, NodeId weights, NodeId bias) {
  Node n;
  n.kind = Kind::kFullyConnected;
  n.inputs = {input, weights, bias};
  n.input_count = 3;
  n.owned = lisaliency::fully_connected(value(input), value(weights), value(bias));
  return push(std::move(n));
}

NodeId GradientTape::softmax(NodeId input) {
  Node n;
  n.kind = Kind::kSoftmax;
  n.inputs = {input};
  n.input_count = 1;
  n.owned = lisaliency::softmax(value(input));
  return push(std::move(n));
}

NodeId GradientTape::select(NodeId input, std::size_t index) {
  const Tensor& x = value(input);
  if (index >= x.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "select index " + std::to_string(index) + " out of range for " +
                    shape_string(x.shape()));
  }
  Node n;
  n.kind = Kind::kSelect;
  n.inputs = {input};
  n.input_count = 1;
  n.index = index;
  n.owned = Tensor::scalar(x[index]);
  return push(std::move(n));
}

NodeId GradientTape::cross_entropy(NodeId logits, std::size_t label) {
  Node n;
  n.kind = Kind::kCrossEntropy;
  n.inputs = {logits};
  n.input_count = 1;
  n.index = label;
  n.owned = Tensor::scalar(softmax_cross_entropy(value(logits), label));
  return push(std::move(n));
}

const Tensor& GradientTape::value(NodeId id) const { return node(id).value(); }

Gradients GradientTape::backward(NodeId seed) const {
  const Tensor& seed_value = node(seed).value();
  if (seed_value.size() != 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "backward seed must be a scalar, got " +
                    shape_string(seed_value.shape()));
  }
  return backward_with(seed, Tensor(seed_value.shape(), 1.0f));
}

Gradients GradientTape::backward_with(NodeId seed, Tensor grad_output) const {
  require_same_shape(node(seed).value(), grad_output, "backward seed");
  Gradients out;
  out.grads_.resize(nodes_.size());
  out.grads_[seed.index] = std::move(grad_output);

  for (std::size_t k = seed.index + 1; k-- > 0;) {
    const Node& n = nodes_[k];
    if (n.kind == Kind::kLeaf || !out.grads_[k]) continue;
    out.visited_.push_back(NodeId{k});
    const Tensor& dy = *out.grads_[k];
    auto& slots = out.grads_;
    const NodeId in0 = n.inputs[0];
    const Tensor& x = value(in0);

    switch (n.kind) {
      case Kind::kConv2d: {
        const bool need_params = wants_grad(n.inputs[1]) || wants_grad(n.inputs[2]);
        Conv2dGrads g = conv2d_backward(x, value(n.inputs[1]), dy, n.conv,
                                        wants_grad(in0), need_params);
        if (wants_grad(in0)) accumulate(slots[in0.index], std::move(g.input));
        if (wants_grad(n.inputs[1])) accumulate(slots[n.inputs[1].index], std::move(g.weights));
        if (wants_grad(n.inputs[2])) accumulate(slots[n.inputs[2].index], std::move(g.bias));
        break;
      }
      case Kind::kRelu:
        if (wants_grad(in0)) accumulate(slots[in0.index], relu_backward(x, dy));
        break;
      case Kind::kMaxPool:
        if (wants_grad(in0)) {
          accumulate(slots[in0.index], maxpool2d_backward(x, dy, n.window, n.stride));
        }
        break;
      case Kind::kFlatten:
        if (wants_grad(in0)) accumulate(slots[in0.index], dy.reshaped(x.shape()));
        break;
      case Kind::kFullyConnected: {
        const bool need_params = wants_grad(n.inputs[1]) || wants_grad(n.inputs[2]);
        FullyConnectedGrads g = fully_connected_backward(
            x, value(n.inputs[1]), dy, wants_grad(in0), need_params);
        if (wants_grad(in0)) accumulate(slots[in0.index], std::move(g.input));
        if (wants_grad(n.inputs[1])) accumulate(slots[n.inputs[1].index], std::move(g.weights));
        if (wants_grad(n.inputs[2])) accumulate(slots[n.inputs[2].index], std::move(g.bias));
        break;
      }
      case Kind::kSoftmax:
        if (wants_grad(in0)) accumulate(slots[in0.index], softmax_backward(n.owned, dy));
        break;
      case Kind::kSelect:
        if (wants_grad(in0)) {
          Tensor g(x.shape());
          g[n.index] = dy[0];
          accumulate(slots[in0.index], std::move(g));
        }
        break;
      case Kind::kCrossEntropy:
        if (wants_grad(in0)) {
          Tensor g = softmax_cross_entropy_backward(x, n.index);
          for (float& v : g.values()) v *= dy[0];
          accumulate(slots[in0.index], std::move(g));
        }
        break;
      case Kind::kLeaf:
        break;
    }
  }
  // Leaves that do not require gradients never get a slot.
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    if (!wants_grad(NodeId{k})) out.grads_[k].reset();
  }
  return out;
}

bool Gradients::has(NodeId id) const {
  return id.index < grads_.size() && grads_[id.index].has_value();
}

const Tensor& Gradients::operator[](NodeId id) const {
  if (!has(id)) {
    throw Error(ErrorCode::kNotFound,
                "no gradient recorded for node " + std::to_string(id.index));
  }
  return *grads_[id.index];
}

Tensor Gradients::take(NodeId id) {
  if (!has(id)) {
    throw Error(ErrorCode::kNotFound,
                "no gradient recorded for node " + std::to_string(id.index));
  }
  Tensor t = std::move(*grads_[id.index]);
  grads_[id.index].reset();
  return t;
}

}  // namespace lisaliency
