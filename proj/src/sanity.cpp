#include "lisaliency/sanity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace lisaliency {

std::string_view to_string(RandomizationMode mode) {
  return mode == RandomizationMode::kCascading ? "cascading" : "independent";
}

RandomizationMode parse_randomization_mode(std::string_view s) {
  if (s == "cascading") return RandomizationMode::kCascading;
  if (s == "independent") return RandomizationMode::kIndependent;
  throw Error(ErrorCode::kInvalidArgument,
              "mode must be 'cascading' or 'independent', got '" + std::string(s) + "'");
}

RandomizationPlan RandomizationPlan::top_down(const NetworkSpec& spec, RandomizationMode mode,
                                              std::uint64_t seed) {
  RandomizationPlan plan;
  plan.mode = mode;
  plan.seed = seed;
  plan.layers = learnable_layers(spec);
  std::reverse(plan.layers.begin(), plan.layers.end());
  return plan;
}

NetworkWeights randomize_layer(const NetworkWeights& weights, std::string_view layer,
                               std::uint64_t seed) {
  const std::string wname = weight_name(layer);
  const std::string bname = bias_name(layer);
  if (!weights.contains(wname) || !weights.contains(bname)) {
    throw Error(ErrorCode::kNotFound, "cannot randomize '" + std::string(layer) +
                                          "': not a learnable layer of these weights");
  }
  NetworkWeights out = weights;
  // Keep randomization streams apart from the training initializer.
  auto [w, b] = draw_layer_parameters(layer, weights.at(wname).shape(),
                                      seed ^ 0x9e3779b97f4a7c15ull);
  out.set(wname, std::move(w));
  out.set(bname, std::move(b));
  return out;
}

std::vector<double> hog_descriptor(const Tensor& map, const HogParams& params) {
  if (map.rank() != 2) {
    throw Error(ErrorCode::kShapeMismatch, "hog_descriptor needs an (H,W) map");
  }
  if (params.cell == 0 || params.bins == 0 || params.block == 0) {
    throw Error(ErrorCode::kInvalidArgument, "hog parameters must be positive");
  }
  const std::size_t height = map.dim(0), width = map.dim(1);
  if (height < params.cell || width < params.cell) {
    throw Error(ErrorCode::kInvalidArgument, "map " + shape_string(map.shape()) +
                                                 " is smaller than one HOG cell");
  }
  const std::size_t cells_y = height / params.cell, cells_x = width / params.cell;
  std::vector<double> cells(cells_y * cells_x * params.bins, 0.0);
  const double bin_width = 180.0 / static_cast<double>(params.bins);

  for (std::size_t y = 0; y < cells_y * params.cell; ++y) {
    for (std::size_t x = 0; x < cells_x * params.cell; ++x) {
      const double gx = static_cast<double>(map.at(y, std::min(x + 1, width - 1))) -
                        map.at(y, x == 0 ? 0 : x - 1);
      const double gy = static_cast<double>(map.at(std::min(y + 1, height - 1), x)) -
                        map.at(y == 0 ? 0 : y - 1, x);
      const double magnitude = std::hypot(gx, gy);
      if (magnitude == 0.0) continue;
      double angle = std::atan2(gy, gx) * 180.0 / std::numbers::pi;
      angle = std::fmod(angle + 360.0, 180.0);
      const auto bin = std::min(static_cast<std::size_t>(angle / bin_width), params.bins - 1);
      cells[((y / params.cell) * cells_x + x / params.cell) * params.bins + bin] += magnitude;
    }
  }

  const std::size_t block_y = std::min(params.block, cells_y);
  const std::size_t block_x = std::min(params.block, cells_x);
  std::vector<double> descriptor;
  std::vector<double> block;
  for (std::size_t by = 0; by + block_y <= cells_y; ++by) {
    for (std::size_t bx = 0; bx + block_x <= cells_x; ++bx) {
      block.clear();
      for (std::size_t cy = by; cy < by + block_y; ++cy) {
        for (std::size_t cx = bx; cx < bx + block_x; ++cx) {
          const double* h = &cells[(cy * cells_x + cx) * params.bins];
          block.insert(block.end(), h, h + params.bins);
        }
      }
      double sq = 0.0;
      for (double v : block) sq += v * v;
      const double norm = std::sqrt(sq + params.epsilon * params.epsilon);
      for (double v : block) descriptor.push_back(v / norm);
    }
  }
  return descriptor;
}

namespace {

void check_pair(std::span<const double> x, std::span<const double> y, const char* what) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::kShapeMismatch, std::string(what) + ": length mismatch (" +
                                               std::to_string(x.size()) + " vs " +
                                               std::to_string(y.size()) + ")");
  }
  if (x.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, std::string(what) + " needs at least 2 values");
  }
}

}  // namespace

Correlation pearson(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, "pearson");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return {0.0, true};
  const double r = sxy / std::sqrt(sxx * syy);
  return {std::clamp(r, -1.0, 1.0), false};
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    // Positions i..j (0-based) share the mean 1-based rank.
    const double rank = (static_cast<double>(i + j) / 2.0) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

Correlation spearman(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, "spearman");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

std::vector<double> flatten(const Tensor& t) {
  return std::vector<double>(t.values().begin(), t.values().end());
}

std::vector<SimilarityRecord> run_randomization_test(const NetworkSpec& spec,
                                                     const NetworkWeights& weights,
                                                     const Tensor& image,
                                                     const RandomizationPlan& plan,
                                                     const SaliencyConfig& config) {
  check_compatible(spec, weights);
  const SaliencyMap original = saliency_map(spec, weights, image, config);
  const std::vector<double> original_hog = hog_descriptor(original.values);
  const std::vector<double> original_flat = flatten(original.values);

  std::vector<SimilarityRecord> records;
  records.push_back({0, "original", plan.seed, 1.0, 1.0, original.degenerate});

  NetworkWeights cascade = weights;
  for (std::size_t i = 0; i < plan.layers.size(); ++i) {
    const std::string& layer = plan.layers[i];
    NetworkWeights stage_weights;
    if (plan.mode == RandomizationMode::kCascading) {
      cascade = randomize_layer(cascade, layer, plan.seed);
      stage_weights = cascade;
    } else {
      stage_weights = randomize_layer(weights, layer, plan.seed);
    }
    const SaliencyMap map = saliency_map(spec, stage_weights, image, config);
    const Correlation hog = pearson(original_hog, hog_descriptor(map.values));
    const Correlation rank = spearman(original_flat, flatten(map.values));
    records.push_back({i + 1, layer, plan.seed, hog.value, rank.value,
                       hog.degenerate || rank.degenerate});
  }
  return records;
}

}  // namespace lisaliency
