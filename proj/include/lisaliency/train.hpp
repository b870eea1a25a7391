#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "lisaliency/network_spec.hpp"
#include "lisaliency/weights.hpp"

namespace lisaliency {

struct TrainParams {
  float learning_rate = 0.01f;
  float momentum = 0.9f;
  // Multiplies the learning rate after every epoch.
  float lr_decay = 1.0f;
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;

  void validate() const;
};

struct LabeledImage {
  Tensor image;  // preprocessed network input
  std::size_t label = 0;
};

struct TrainResult {
  NetworkWeights weights;
  std::vector<double> epoch_loss;  // mean cross-entropy per epoch
};

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

// Mini-batch SGD with momentum on the mean cross-entropy loss. Weights are
// initialized from params.seed; single-threaded and deterministic.
TrainResult train(const NetworkSpec& spec, std::span<const LabeledImage> dataset,
                  const TrainParams& params, const EpochCallback& on_epoch = {});

// As above, starting from the given weights.
TrainResult train(const NetworkSpec& spec, NetworkWeights initial,
                  std::span<const LabeledImage> dataset, const TrainParams& params,
                  const EpochCallback& on_epoch = {});

// Fraction of samples whose arg-max class equals the label.
double accuracy(const NetworkSpec& spec, const NetworkWeights& weights,
                std::span<const LabeledImage> samples);

}  // namespace lisaliency
