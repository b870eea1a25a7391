#include "lisaliency/lateral_inhibition.hpp"

#include <cmath>

#include "lisaliency/maps.hpp"

namespace lisaliency {

void LIParams::validate() const {
  if (k == 0 || k % 2 == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "inhibition zone side k must be odd and positive, got " + std::to_string(k));
  }
  if (!std::isfinite(a) || !std::isfinite(b)) {
    throw Error(ErrorCode::kInvalidArgument, "inhibition coefficients must be finite");
  }
}

std::string_view to_string(LiSource source) {
  return source == LiSource::kGradient ? "gradient" : "activation";
}

LiSource parse_li_source(std::string_view s) {
  if (s == "gradient") return LiSource::kGradient;
  if (s == "activation") return LiSource::kActivation;
  throw Error(ErrorCode::kInvalidArgument,
              "li_source must be 'gradient' or 'activation', got '" + std::string(s) + "'");
}

MaxCMap max_c(const Tensor& tensor, std::string layer) {
  return {channel_max(tensor), std::move(layer)};
}

Tensor inhibition_field(const Tensor& map, const LIParams& params) {
  params.validate();
  if (map.rank() != 2) {
    throw Error(ErrorCode::kShapeMismatch,
                "inhibition_field needs an (H,W) map, got " + shape_string(map.shape()));
  }
  const auto height = static_cast<std::ptrdiff_t>(map.dim(0));
  const auto width = static_cast<std::ptrdiff_t>(map.dim(1));
  const auto half = static_cast<std::ptrdiff_t>(params.k / 2);
  const auto side = static_cast<std::ptrdiff_t>(params.k);
  const double zone = static_cast<double>(params.k * params.k);

  // d * exp(-d) for every zone offset.
  std::vector<double> weight(params.k * params.k);
  for (std::ptrdiff_t du = -half; du <= half; ++du) {
    for (std::ptrdiff_t dv = -half; dv <= half; ++dv) {
      const double d = std::sqrt(static_cast<double>(du * du + dv * dv)) / static_cast<double>(params.k);
      weight[static_cast<std::size_t>((du + half) * side + (dv + half))] = d * std::exp(-d);
    }
  }

  Tensor field(map.shape());
  for (std::ptrdiff_t i = 0; i < height; ++i) {
    for (std::ptrdiff_t j = 0; j < width; ++j) {
      const double centre = map.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      double sum = 0.0;
      double differential = 0.0;
      for (std::ptrdiff_t du = -half; du <= half; ++du) {
        const std::ptrdiff_t u = i + du;
        const bool row_inside = u >= 0 && u < height;
        for (std::ptrdiff_t dv = -half; dv <= half; ++dv) {
          const std::ptrdiff_t v = j + dv;
          const double x = (row_inside && v >= 0 && v < width)
                               ? map.at(static_cast<std::size_t>(u), static_cast<std::size_t>(v))
                               : 0.0;
          sum += x;
          const double diff = x - centre;
          if (diff > 0.0) {
            differential += weight[static_cast<std::size_t>((du + half) * side + (dv + half))] * diff;
          }
        }
      }
      const double value = params.a * std::exp(-sum / zone) + params.b * differential;
      field.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = static_cast<float>(value);
    }
  }
  require_finite(field, "inhibition_field");
  return field;
}

Tensor inhibition_field(const MaxCMap& map, const LIParams& params) {
  return inhibition_field(map.values, params);
}

Tensor gate(const Tensor& map, const Tensor& field) {
  require_same_shape(map, field, "gate");
  Tensor mask(map.shape());
  for (std::size_t i = 0; i < map.size(); ++i) {
    mask[i] = (static_cast<double>(map[i]) - field[i] > 0.0) ? 1.0f : 0.0f;
  }
  return mask;
}

void SuppressionMaskSet::add(std::string layer, Tensor mask) {
  if (contains(layer)) {
    throw Error(ErrorCode::kInvalidArgument, "duplicate suppression mask for layer " + layer);
  }
  masks_.emplace_back(std::move(layer), std::move(mask));
}

bool SuppressionMaskSet::contains(std::string_view layer) const {
  for (const auto& e : masks_) {
    if (e.first == layer) return true;
  }
  return false;
}

const Tensor& SuppressionMaskSet::at(std::string_view layer) const {
  for (const auto& e : masks_) {
    if (e.first == layer) return e.second;
  }
  throw Error(ErrorCode::kNotFound, "no suppression mask for layer " + std::string(layer));
}

SuppressionMaskSet SuppressionMaskSet::filled(std::span<const ReluRecord> relus, float value) {
  SuppressionMaskSet set;
  for (const auto& r : relus) {
    const Tensor chw = as_chw(r.activation);
    set.add(r.layer, Tensor({chw.dim(1), chw.dim(2)}, value));
  }
  return set;
}

SuppressionMaskSet build_suppression_masks(const ActivationTrace& trace, const LIParams& params,
                                           LiSource source) {
  params.validate();
  if (source == LiSource::kGradient && !trace.has_gradients()) {
    throw Error(ErrorCode::kState,
                "build_suppression_masks: trace has no gradients (run backprop_category first)");
  }
  SuppressionMaskSet set;
  for (const ReluRecord& relu : trace.relus()) {
    const Tensor& source_tensor =
        source == LiSource::kGradient ? relu.gradient : relu.activation;
    if (source_tensor.empty()) {
      throw Error(ErrorCode::kState, "missing gradient for layer " + relu.layer);
    }
    const MaxCMap map = max_c(source_tensor, relu.layer);
    const NormalizedMap field = normalize_l2(inhibition_field(map, params));
    set.add(relu.layer, gate(map.values, field.values));
  }
  return set;
}

}  // namespace lisaliency
