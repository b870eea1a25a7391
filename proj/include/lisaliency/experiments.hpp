#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lisaliency/saliency.hpp"

namespace lisaliency {

enum class BlurRegion { kBackground, kForeground };

std::string_view to_string(BlurRegion region);
BlurRegion parse_blur_region(std::string_view s);

struct BlurConfig {
  std::vector<double> radii{2.0, 5.0, 10.0};
  std::vector<BlurRegion> regions{BlurRegion::kBackground, BlurRegion::kForeground};
  // Saliency cells at or above threshold * max(map) count as salient.
  double threshold = 0.1;

  void validate() const;
};

// Normalized Gaussian taps with sigma = radius and half-width ceil(3 sigma).
std::vector<double> gaussian_kernel(double radius);

// Separable per-channel Gaussian blur with clamp-to-edge borders. Radius 0
// returns the input unchanged.
Tensor gaussian_blur(const Tensor& image, double radius);

struct BinaryMask {
  Tensor values;  // (H, W) of 0/1
  bool degenerate = false;
};

BinaryMask saliency_to_mask(const Tensor& map, double threshold);
inline BinaryMask saliency_to_mask(const SaliencyMap& map, double threshold) {
  return saliency_to_mask(map.values, threshold);
}

// Hard composite of `image` and `blurred`. Background: salient pixels
// (mask 1) keep the original. Foreground: salient pixels take the blur.
Tensor composite(const Tensor& image, const Tensor& blurred, const Tensor& mask,
                 BlurRegion region);
Tensor blend_blur(const Tensor& image, const Tensor& mask, double radius, BlurRegion region);

struct PredictionRecord {
  std::string image_id;
  std::string variant;
  std::size_t label = 0;
  std::vector<std::size_t> top_classes;  // up to 5, best first
  std::vector<float> top_probs;
};

struct VariantAccuracy {
  std::string variant;
  std::string region;  // "none" for the original images
  double radius = 0.0;
  double top1 = 0.0;
  double top5 = 0.0;
  std::size_t count = 0;
};

struct FlipRecord {
  std::string image_id;
  std::string variant;
  std::size_t label = 0;
  std::size_t original_top1 = 0;
  std::size_t variant_top1 = 0;
};

struct AccuracyReport {
  std::vector<VariantAccuracy> variants;  // "original" first
  std::vector<PredictionRecord> predictions;
  // Images wrong on the original but right (top-1) under background blur.
  std::vector<FlipRecord> flips;
  std::vector<double> mask_area;  // salient fraction per image
};

std::string variant_name(BlurRegion region, double radius);

// Top-1/top-5 accuracy per variant plus the flip list, from raw predictions.
AccuracyReport summarize_predictions(std::vector<PredictionRecord> predictions,
                                     const BlurConfig& config);

struct ExperimentSample {
  std::string id;
  Tensor image;  // image space, network input resolution
  std::size_t label = 0;
};

// image-space (3, H, W) -> class probabilities
using Classifier = std::function<Tensor(const Tensor&)>;
using SaliencySource = std::function<SaliencyMap(const Tensor&)>;

AccuracyReport run_blur_experiment(std::span<const ExperimentSample> dataset,
                                   const BlurConfig& config, const Classifier& classify,
                                   const SaliencySource& saliency);

// Saliency on the unblurred image (no label information), one mask per
// image, every variant classified by the same network.
AccuracyReport run_blur_experiment(const NetworkSpec& spec, const NetworkWeights& weights,
                                   std::span<const ExperimentSample> dataset,
                                   const BlurConfig& config,
                                   const SaliencyConfig& saliency_config = {});

}  // namespace lisaliency
