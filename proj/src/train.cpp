#include "lisaliency/train.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "lisaliency/network.hpp"

namespace lisaliency {

void TrainParams::validate() const {
  if (!(learning_rate >= 0.0f) || !(momentum >= 0.0f && momentum < 1.0f) ||
      !(lr_decay > 0.0f) || batch_size == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "train: need lr >= 0, 0 <= momentum < 1, lr_decay > 0, batch > 0");
  }
}

TrainResult train(const NetworkSpec& spec, std::span<const LabeledImage> dataset,
                  const TrainParams& params, const EpochCallback& on_epoch) {
  return train(spec, initialize_weights(spec, params.seed), dataset, params, on_epoch);
}

TrainResult train(const NetworkSpec& spec, NetworkWeights initial,
                  std::span<const LabeledImage> dataset, const TrainParams& params,
                  const EpochCallback& on_epoch) {
  params.validate();
  check_compatible(spec, initial);
  if (dataset.empty()) throw Error(ErrorCode::kInvalidArgument, "train: dataset is empty");
  for (const auto& sample : dataset) {
    if (sample.label >= spec.class_count()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "train: label " + std::to_string(sample.label) + " >= class count");
    }
  }

  TrainResult result;
  result.weights = std::move(initial);
  auto entries = result.weights.entries();
  std::vector<Tensor> velocity, grad_sum;
  for (const auto& e : entries) {
    velocity.emplace_back(e.second.shape(), 0.0f);
    grad_sum.emplace_back(e.second.shape(), 0.0f);
  }

  std::mt19937_64 rng(params.seed ^ 0x5deece66dull);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  float lr = params.learning_rate;

  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    // Fisher-Yates with the raw engine output so the order does not depend
    // on the standard library's distribution implementation.
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng() % i]);
    }
    double loss_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += params.batch_size) {
      const std::size_t end = std::min(order.size(), start + params.batch_size);
      for (auto& g : grad_sum) std::fill(g.values().begin(), g.values().end(), 0.0f);

      for (std::size_t k = start; k < end; ++k) {
        const LabeledImage& sample = dataset[order[k]];
        GradientTape tape;
        NodeId loss;
        RecordedForward rec;
        try {
          rec = record_forward(tape, spec, result.weights, sample.image, true);
          loss = tape.cross_entropy(rec.logits, sample.label);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kNumeric) throw;
          throw Error(ErrorCode::kDivergence, "training diverged in epoch " + std::to_string(epoch) +
                                                  " (" + e.what() + ")");
        }
        const double value = tape.value(loss)[0];
        if (!std::isfinite(value)) {
          throw Error(ErrorCode::kDivergence,
                      "training diverged in epoch " + std::to_string(epoch) + ": loss is not finite");
        }
        loss_total += value;
        Gradients grads = tape.backward(loss);
        for (std::size_t p = 0; p < entries.size(); ++p) {
          const Tensor& g = grads[rec.parameters[p]];
          float* dst = grad_sum[p].data();
          for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
        }
      }

      const float scale = 1.0f / static_cast<float>(end - start);
      for (std::size_t p = 0; p < entries.size(); ++p) {
        float* w = entries[p].second.data();
        float* v = velocity[p].data();
        const float* g = grad_sum[p].data();
        for (std::size_t i = 0; i < velocity[p].size(); ++i) {
          v[i] = params.momentum * v[i] + g[i] * scale;
          w[i] -= lr * v[i];
        }
        for (float x : entries[p].second.values()) {
          if (!std::isfinite(x)) {
            throw Error(ErrorCode::kDivergence, "training diverged in epoch " +
                                                    std::to_string(epoch) + ": parameter " +
                                                    entries[p].first + " is not finite");
          }
        }
      }
    }
    const double mean_loss = loss_total / static_cast<double>(dataset.size());
    result.epoch_loss.push_back(mean_loss);
    if (on_epoch) on_epoch(epoch, mean_loss);
    lr *= params.lr_decay;
  }
  return result;
}

double accuracy(const NetworkSpec& spec, const NetworkWeights& weights,
                std::span<const LabeledImage> samples) {
  if (samples.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& s : samples) {
    const ForwardResult out = forward(spec, weights, s.image);
    if (top_k(out.probabilities, 1)[0] == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

}  // namespace lisaliency
