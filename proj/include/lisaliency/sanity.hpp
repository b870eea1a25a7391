#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lisaliency/saliency.hpp"

namespace lisaliency {

enum class RandomizationMode { kCascading, kIndependent };

std::string_view to_string(RandomizationMode mode);
RandomizationMode parse_randomization_mode(std::string_view s);

struct RandomizationPlan {
  RandomizationMode mode = RandomizationMode::kCascading;
  // Learnable layers from the output layer down to the first convolution.
  std::vector<std::string> layers;
  std::uint64_t seed = 0;

  static RandomizationPlan top_down(const NetworkSpec& spec, RandomizationMode mode,
                                    std::uint64_t seed);
};

struct SimilarityRecord {
  std::size_t stage = 0;
  std::string layer;  // "original" for stage 0
  std::uint64_t seed = 0;
  double hog_pearson = 1.0;
  double spearman = 1.0;
  // Set when a correlation fell back to 0 because an input had no variance.
  bool degenerate = false;
};

// Copy of `weights` with one layer's weight and bias re-drawn from the
// initializer. Throws if the layer has no parameters.
NetworkWeights randomize_layer(const NetworkWeights& weights, std::string_view layer,
                               std::uint64_t seed);

struct HogParams {
  std::size_t cell = 8;
  std::size_t bins = 9;   // unsigned orientations over [0, 180)
  std::size_t block = 2;  // cells per block side, stride one cell
  double epsilon = 1e-6;
};

// Histogram-of-oriented-gradients descriptor of an (H, W) map. Gradients use
// central differences with edge replication; each magnitude votes into the
// bin floor(angle / (180 / bins)). Block vectors are v / sqrt(|v|^2 + eps^2).
std::vector<double> hog_descriptor(const Tensor& map, const HogParams& params = {});

struct Correlation {
  double value = 0.0;
  bool degenerate = false;  // an input had zero variance; value is 0
};

Correlation pearson(std::span<const double> x, std::span<const double> y);
// Pearson correlation of average ranks (ties share the mean rank).
Correlation spearman(std::span<const double> x, std::span<const double> y);
std::vector<double> average_ranks(std::span<const double> x);

std::vector<double> flatten(const Tensor& t);

// Stage 0 is the trained model. Cascading stages randomize one more layer
// each (top-down, cumulative); independent stages randomize exactly one.
std::vector<SimilarityRecord> run_randomization_test(const NetworkSpec& spec,
                                                     const NetworkWeights& weights,
                                                     const Tensor& image,
                                                     const RandomizationPlan& plan,
                                                     const SaliencyConfig& config = {});

}  // namespace lisaliency
