#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lisaliency/network_spec.hpp"
#include "lisaliency/tape.hpp"
#include "lisaliency/weights.hpp"

namespace lisaliency {

// Where the category back-propagation is seeded.
enum class TapPoint { kBeforeSoftmax, kAfterSoftmax };

std::string_view to_string(TapPoint tap);
TapPoint parse_tap_point(std::string_view s);

// Called after every ReLU with its index (in forward order) and output; may
// modify the output in place before it feeds the next layer.
using ReluHook = std::function<void(std::size_t relu_index, Tensor& activation)>;

struct ForwardResult {
  Tensor logits;
  Tensor probabilities;
  std::vector<Tensor> relu_outputs;
};

ForwardResult forward(const NetworkSpec& spec, const NetworkWeights& weights,
                      const Tensor& image, const ReluHook& hook = {});

// Class indices sorted by decreasing probability; ties go to the lower index.
std::vector<std::size_t> top_k(const Tensor& probabilities, std::size_t k);

struct ReluRecord {
  std::string layer;
  Tensor activation;
  Tensor gradient;  // empty until back-propagation
};

/// Saved ReLU outputs of one traced forward pass, plus the per-ReLU
/// gradients once a category has been back-propagated.
///
/// A trace borrows the weights it was computed with; they must outlive it.
class ActivationTrace {
 public:
  std::span<const ReluRecord> relus() const noexcept { return relus_; }
  const Tensor& logits() const noexcept { return logits_; }
  const Tensor& probabilities() const noexcept { return probabilities_; }
  std::vector<std::size_t> top_classes(std::size_t k) const { return top_k(probabilities_, k); }

  bool has_gradients() const noexcept { return category_.has_value(); }
  std::optional<std::size_t> category() const noexcept { return category_; }
  TapPoint tap() const noexcept { return tap_; }

  // Drops the recorded tape. The activations stay readable but no further
  // back-propagation is possible.
  void release_tape() noexcept { tape_.reset(); }
  bool consumed() const noexcept { return !tape_; }

 private:
  friend ActivationTrace forward_traced(const NetworkSpec&, const NetworkWeights&, const Tensor&);
  friend ActivationTrace backprop_category(const ActivationTrace&, std::size_t, TapPoint);

  std::shared_ptr<const GradientTape> tape_;
  std::vector<NodeId> relu_nodes_;
  NodeId logits_node_;
  NodeId probabilities_node_;
  std::vector<ReluRecord> relus_;
  Tensor logits_;
  Tensor probabilities_;
  std::optional<std::size_t> category_;
  TapPoint tap_ = TapPoint::kAfterSoftmax;
};

ActivationTrace forward_traced(const NetworkSpec& spec, const NetworkWeights& weights,
                               const Tensor& image);

struct RecordedForward {
  NodeId logits;
  NodeId probabilities;
  std::vector<NodeId> relus;
  // Parallel to weights.entries().
  std::vector<NodeId> parameters;
};

// Records the forward pass of `image` on `tape`. Parameters are borrowed
// from `weights`.
RecordedForward record_forward(GradientTape& tape, const NetworkSpec& spec,
                               const NetworkWeights& weights, const Tensor& image,
                               bool parameters_require_grad);

// Returns a copy of `trace` whose ReLU gradients hold d(score)/d(ReLU output),
// where score is the class logit (before softmax) or probability (after).
ActivationTrace backprop_category(const ActivationTrace& trace, std::size_t class_index,
                                  TapPoint tap = TapPoint::kAfterSoftmax);

}  // namespace lisaliency
