#pragma once

#include <array>
#include <cstddef>

#include "lisaliency/tensor.hpp"

namespace lisaliency {

struct PreprocessConfig {
  std::size_t target_h = 64;
  std::size_t target_w = 64;
  // Images are first resized so that their shorter edge has this length.
  std::size_t resize_shorter = 64;
  std::array<float, 3> mean{0.0f, 0.0f, 0.0f};
  std::array<float, 3> std{1.0f, 1.0f, 1.0f};

  void validate() const;
};

// Bilinear resize of every channel of a (C, H, W) image. Corner-aligned.
Tensor resize_image(const Tensor& image, std::size_t out_h, std::size_t out_w);

// Resize so the shorter edge equals cfg.resize_shorter, then centre-crop to
// the target size. Values stay in image space.
Tensor fit_to_input(const Tensor& image, const PreprocessConfig& cfg);

// (x - mean[c]) / std[c] per channel.
Tensor normalize_channels(const Tensor& image, const PreprocessConfig& cfg);

// fit_to_input followed by normalize_channels.
Tensor preprocess(const Tensor& image, const PreprocessConfig& cfg);

}  // namespace lisaliency
