#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "lisaliency/ops.hpp"
#include "lisaliency/tensor.hpp"

namespace lisaliency {

struct NodeId {
  std::size_t index = 0;
  auto operator<=>(const NodeId&) const = default;
};

class Gradients;

/// Records a forward computation so that reverse-mode gradients of any scalar
/// node can be computed afterwards. Every op node always receives a
/// gradient during backward(); leaves receive one only if they were created
/// with requires_grad.
///
/// Nodes created with watch() borrow their tensor. The caller keeps it alive
/// (and unmodified) for as long as the tape is used.
class GradientTape {
 public:
  NodeId input(Tensor value, bool requires_grad = true);
  NodeId watch(const Tensor& value, bool requires_grad);

  NodeId conv2d(NodeId input, NodeId weights, NodeId bias, Conv2dParams params);
  NodeId relu(NodeId input);
  NodeId maxpool2d(NodeId input, std::size_t window, std::size_t stride);
  NodeId flatten(NodeId input);
  NodeId fully_connected(NodeId input, NodeId weights, NodeId bias);
  NodeId softmax(NodeId input);
  // Scalar holding element `index` of the input.
  NodeId select(NodeId input, std::size_t index);
  // Scalar -log softmax(logits)[label].
  NodeId cross_entropy(NodeId logits, std::size_t label);

  const Tensor& value(NodeId id) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  // Gradient of the scalar `seed` node with respect to every node it depends
  // on. Op nodes are replayed once each in reverse recording order.
  Gradients backward(NodeId seed) const;
  // Vector-Jacobian product: back-propagates `grad_output` (shaped like the
  // value of `from`) through everything `from` depends on.
  Gradients backward_with(NodeId from, Tensor grad_output) const;

 private:
  enum class Kind {
    kLeaf,
    kConv2d,
    kRelu,
    kMaxPool,
    kFlatten,
    kFullyConnected,
    kSoftmax,
    kSelect,
    kCrossEntropy,
  };

  struct Node {
    Kind kind = Kind::kLeaf;
    std::array<NodeId, 3> inputs{};
    std::size_t input_count = 0;
    Tensor owned;
    const Tensor* borrowed = nullptr;
    bool requires_grad = false;
    Conv2dParams conv;
    std::size_t window = 0;
    std::size_t stride = 0;
    std::size_t index = 0;

    const Tensor& value() const { return borrowed ? *borrowed : owned; }
  };

  const Node& node(NodeId id) const;
  NodeId push(Node node);
  bool wants_grad(NodeId id) const;

  std::vector<Node> nodes_;
};

class Gradients {
 public:
  bool has(NodeId id) const;
  const Tensor& operator[](NodeId id) const;
  Tensor take(NodeId id);
  // Op nodes whose backward rule ran, in execution order.
  std::span<const NodeId> visit_order() const noexcept { return visited_; }

 private:
  friend class GradientTape;
  std::vector<std::optional<Tensor>> grads_;
  std::vector<NodeId> visited_;
};

}  // namespace lisaliency
