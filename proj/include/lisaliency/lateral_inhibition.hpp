#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lisaliency/network.hpp"
#include "lisaliency/tensor.hpp"

namespace lisaliency {

struct LIParams {
  double a = 0.1;  // weight of the average term
  double b = 0.9;  // weight of the differential term
  std::size_t k = 7;  // side of the square inhibition zone; odd

  void validate() const;
};

// Which per-ReLU tensor the Max-C map is built from.
enum class LiSource { kGradient, kActivation };

std::string_view to_string(LiSource source);
LiSource parse_li_source(std::string_view s);

struct MaxCMap {
  Tensor values;  // (H, W)
  std::string layer;
};

MaxCMap max_c(const Tensor& tensor, std::string layer = {});

/// Inhibition strength at every cell of an (H, W) map:
///
///   a * exp(-mean(Z)) + b * sum_{(u,v) in Z} d * exp(-d) * max(0, x_uv - x_ij)
///
/// Z is the k x k zone centred on (i, j) over the zero-padded map (padding
/// floor(k/2)), so the mean always divides by k^2 and padded cells take part
/// in the differential term with value 0. d is the Euclidean offset from the
/// centre divided by k.
Tensor inhibition_field(const Tensor& map, const LIParams& params);
Tensor inhibition_field(const MaxCMap& map, const LIParams& params);

// mask[i, j] = 1 if map[i, j] - field[i, j] > 0, else 0. `field` is expected
// to be L2-normalized already.
Tensor gate(const Tensor& map, const Tensor& field);

/// One binary (H, W) mask per ReLU layer, in forward order.
class SuppressionMaskSet {
 public:
  using Entry = std::pair<std::string, Tensor>;

  void add(std::string layer, Tensor mask);
  const Tensor& at(std::string_view layer) const;
  bool contains(std::string_view layer) const;
  std::span<const Entry> entries() const noexcept { return masks_; }
  std::size_t size() const noexcept { return masks_.size(); }

  // Masks of all ones (or all zeros) shaped for every ReLU of `trace`.
  static SuppressionMaskSet filled(std::span<const ReluRecord> relus, float value);

 private:
  std::vector<Entry> masks_;
};

// For every ReLU layer: Max-C of the chosen tensor, inhibition field,
// L2-normalized field, gate against the same Max-C map.
SuppressionMaskSet build_suppression_masks(const ActivationTrace& trace, const LIParams& params,
                                           LiSource source = LiSource::kGradient);

}  // namespace lisaliency
