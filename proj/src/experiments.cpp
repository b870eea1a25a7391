#include "lisaliency/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "lisaliency/parallel.hpp"

namespace lisaliency {

std::string_view to_string(BlurRegion region) {
  return region == BlurRegion::kBackground ? "background" : "foreground";
}

BlurRegion parse_blur_region(std::string_view s) {
  if (s == "background") return BlurRegion::kBackground;
  if (s == "foreground") return BlurRegion::kForeground;
  throw Error(ErrorCode::kInvalidArgument,
              "region must be 'background' or 'foreground', got '" + std::string(s) + "'");
}

void BlurConfig::validate() const {
  for (double r : radii) {
    if (!(r >= 0.0) || !std::isfinite(r)) {
      throw Error(ErrorCode::kInvalidArgument, "blur radii must be finite and >= 0");
    }
  }
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "mask threshold must lie in (0, 1)");
  }
}

std::vector<double> gaussian_kernel(double radius) {
  if (!(radius >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "blur radius must be >= 0");
  if (radius == 0.0) return {1.0};
  const auto half = static_cast<std::size_t>(std::ceil(3.0 * radius));
  std::vector<double> taps(2 * half + 1);
  double total = 0.0;
  for (std::size_t i = 0; i < taps.size(); ++i) {
    const double x = static_cast<double>(i) - static_cast<double>(half);
    taps[i] = std::exp(-x * x / (2.0 * radius * radius));
    total += taps[i];
  }
  for (double& t : taps) t /= total;
  return taps;
}

Tensor gaussian_blur(const Tensor& image, double radius) {
  if (image.rank() != 3) {
    throw Error(ErrorCode::kShapeMismatch, "gaussian_blur needs a (C,H,W) image");
  }
  const std::vector<double> taps = gaussian_kernel(radius);
  if (taps.size() == 1) return image;
  const auto half = static_cast<std::ptrdiff_t>(taps.size() / 2);
  const auto height = static_cast<std::ptrdiff_t>(image.dim(1));
  const auto width = static_cast<std::ptrdiff_t>(image.dim(2));
  auto clamp = [](std::ptrdiff_t v, std::ptrdiff_t n) { return std::clamp<std::ptrdiff_t>(v, 0, n - 1); };

  Tensor out(image.shape());
  std::vector<double> rows(static_cast<std::size_t>(height * width));
  for (std::size_t c = 0; c < image.dim(0); ++c) {
    const float* src = image.data() + c * static_cast<std::size_t>(height * width);
    for (std::ptrdiff_t y = 0; y < height; ++y) {
      for (std::ptrdiff_t x = 0; x < width; ++x) {
        double acc = 0.0;
        for (std::ptrdiff_t t = -half; t <= half; ++t) {
          acc += taps[static_cast<std::size_t>(t + half)] * src[y * width + clamp(x + t, width)];
        }
        rows[static_cast<std::size_t>(y * width + x)] = acc;
      }
    }
    float* dst = out.data() + c * static_cast<std::size_t>(height * width);
    for (std::ptrdiff_t y = 0; y < height; ++y) {
      for (std::ptrdiff_t x = 0; x < width; ++x) {
        double acc = 0.0;
        for (std::ptrdiff_t t = -half; t <= half; ++t) {
          acc += taps[static_cast<std::size_t>(t + half)] *
                 rows[static_cast<std::size_t>(clamp(y + t, height) * width + x)];
        }
        dst[y * width + x] = static_cast<float>(acc);
      }
    }
  }
  return out;
}

BinaryMask saliency_to_mask(const Tensor& map, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "mask threshold must lie in (0, 1)");
  }
  BinaryMask mask{Tensor(map.shape(), 0.0f), false};
  const float peak = *std::max_element(map.values().begin(), map.values().end());
  if (!(peak > 0.0f)) {
    mask.degenerate = true;
    return mask;
  }
  const double cut = threshold * peak;
  for (std::size_t i = 0; i < map.size(); ++i) {
    mask.values[i] = map[i] >= cut ? 1.0f : 0.0f;
  }
  return mask;
}

Tensor composite(const Tensor& image, const Tensor& blurred, const Tensor& mask,
                 BlurRegion region) {
  require_same_shape(image, blurred, "composite");
  if (image.rank() != 3 || mask.shape() != Shape{image.dim(1), image.dim(2)}) {
    throw Error(ErrorCode::kShapeMismatch, "mask " + shape_string(mask.shape()) +
                                               " does not match image " +
                                               shape_string(image.shape()));
  }
  Tensor out(image.shape());
  const std::size_t plane = mask.size();
  for (std::size_t c = 0; c < image.dim(0); ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      const bool salient = mask[i] != 0.0f;
      const bool keep = region == BlurRegion::kBackground ? salient : !salient;
      out[c * plane + i] = keep ? image[c * plane + i] : blurred[c * plane + i];
    }
  }
  return out;
}

Tensor blend_blur(const Tensor& image, const Tensor& mask, double radius, BlurRegion region) {
  return composite(image, gaussian_blur(image, radius), mask, region);
}

std::string variant_name(BlurRegion region, double radius) {
  std::ostringstream os;
  os << to_string(region) << "_r" << radius;
  return os.str();
}

AccuracyReport summarize_predictions(std::vector<PredictionRecord> predictions,
                                     const BlurConfig& config) {
  AccuracyReport report;
  report.variants.push_back({"original", "none", 0.0, 0.0, 0.0, 0});
  for (BlurRegion region : config.regions) {
    for (double r : config.radii) {
      report.variants.push_back({variant_name(region, r), std::string(to_string(region)), r, 0.0, 0.0, 0});
    }
  }
  std::map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < report.variants.size(); ++i) slot[report.variants[i].variant] = i;

  std::vector<std::size_t> hit1(report.variants.size()), hit5(report.variants.size());
  std::map<std::string, const PredictionRecord*> originals;
  for (const auto& p : predictions) {
    const auto it = slot.find(p.variant);
    if (it == slot.end()) {
      throw Error(ErrorCode::kInvalidArgument, "prediction for unknown variant " + p.variant);
    }
    VariantAccuracy& v = report.variants[it->second];
    ++v.count;
    if (p.top_classes.empty()) continue;
    if (p.top_classes.front() == p.label) ++hit1[it->second];
    const std::size_t k = std::min<std::size_t>(5, p.top_classes.size());
    if (std::find(p.top_classes.begin(), p.top_classes.begin() + static_cast<std::ptrdiff_t>(k), p.label) !=
        p.top_classes.begin() + static_cast<std::ptrdiff_t>(k)) {
      ++hit5[it->second];
    }
    if (p.variant == "original") originals[p.image_id] = &p;
  }
  for (std::size_t i = 0; i < report.variants.size(); ++i) {
    VariantAccuracy& v = report.variants[i];
    if (v.count) {
      v.top1 = static_cast<double>(hit1[i]) / static_cast<double>(v.count);
      v.top5 = static_cast<double>(hit5[i]) / static_cast<double>(v.count);
    }
  }
  for (const auto& p : predictions) {
    if (p.variant == "original" || p.top_classes.empty()) continue;
    if (p.variant.rfind("background", 0) != 0) continue;
    const auto it = originals.find(p.image_id);
    if (it == originals.end() || it->second->top_classes.empty()) continue;
    const std::size_t before = it->second->top_classes.front();
    if (before != p.label && p.top_classes.front() == p.label) {
      report.flips.push_back({p.image_id, p.variant, p.label, before, p.top_classes.front()});
    }
  }
  report.predictions = std::move(predictions);
  return report;
}

namespace {

PredictionRecord predict(const Classifier& classify, const ExperimentSample& sample,
                         std::string variant, const Tensor& image) {
  const Tensor probs = classify(image);
  PredictionRecord rec{sample.id, std::move(variant), sample.label, top_k(probs, 5), {}};
  for (std::size_t c : rec.top_classes) rec.top_probs.push_back(probs[c]);
  return rec;
}

}  // namespace

AccuracyReport run_blur_experiment(std::span<const ExperimentSample> dataset,
                                   const BlurConfig& config, const Classifier& classify,
                                   const SaliencySource& saliency) {
  config.validate();
  if (dataset.empty()) throw Error(ErrorCode::kInvalidArgument, "blur experiment: dataset is empty");
  const std::size_t per_image = 1 + config.radii.size() * config.regions.size();
  std::vector<PredictionRecord> predictions(dataset.size() * per_image);
  std::vector<double> area(dataset.size());

  parallel_for(dataset.size(), [&](std::size_t i) {
    const ExperimentSample& sample = dataset[i];
    // One mask per image, from the unblurred image, shared by every variant.
    const BinaryMask mask = saliency_to_mask(saliency(sample.image), config.threshold);
    double salient = 0.0;
    for (float v : mask.values.values()) salient += v;
    area[i] = salient / static_cast<double>(mask.values.size());

    std::vector<Tensor> blurred;
    for (double r : config.radii) blurred.push_back(gaussian_blur(sample.image, r));
    std::size_t slot = i * per_image;
    predictions[slot++] = predict(classify, sample, "original", sample.image);
    for (BlurRegion region : config.regions) {
      for (std::size_t r = 0; r < config.radii.size(); ++r) {
        predictions[slot++] =
            predict(classify, sample, variant_name(region, config.radii[r]),
                    composite(sample.image, blurred[r], mask.values, region));
      }
    }
  });

  AccuracyReport report = summarize_predictions(std::move(predictions), config);
  report.mask_area = std::move(area);
  return report;
}

AccuracyReport run_blur_experiment(const NetworkSpec& spec, const NetworkWeights& weights,
                                   std::span<const ExperimentSample> dataset,
                                   const BlurConfig& config,
                                   const SaliencyConfig& saliency_config) {
  check_compatible(spec, weights);
  Classifier classify = [&](const Tensor& image) {
    return forward(spec, weights, normalize_channels(image, spec.preprocess)).probabilities;
  };
  SaliencySource saliency = [&](const Tensor& image) {
    return saliency_map(spec, weights, normalize_channels(image, spec.preprocess), saliency_config);
  };
  return run_blur_experiment(dataset, config, classify, saliency);
}

}  // namespace lisaliency
