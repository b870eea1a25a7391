#include "lisaliency/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lisaliency/maps.hpp"

namespace lisaliency {

void PreprocessConfig::validate() const {
  if (target_h == 0 || target_w == 0) {
    throw Error(ErrorCode::kInvalidArgument, "preprocess target size must be positive");
  }
  if (resize_shorter < std::max(target_h, target_w)) {
    throw Error(ErrorCode::kInvalidArgument,
                "resize_shorter (" + std::to_string(resize_shorter) +
                    ") is smaller than the crop target");
  }
  for (std::size_t c = 0; c < 3; ++c) {
    if (!std::isfinite(mean[c]) || !std::isfinite(std[c]) || std[c] <= 0.0f) {
      throw Error(ErrorCode::kInvalidArgument, "preprocess mean/std must be finite with std > 0");
    }
  }
}

Tensor resize_image(const Tensor& image, std::size_t out_h, std::size_t out_w) {
  if (image.rank() != 3) {
    throw Error(ErrorCode::kShapeMismatch, "resize_image needs a (C,H,W) image, got " +
                                               shape_string(image.shape()));
  }
  const std::size_t channels = image.dim(0), in_h = image.dim(1), in_w = image.dim(2);
  if (in_h == out_h && in_w == out_w) return image;
  Tensor out({channels, out_h, out_w});
  for (std::size_t c = 0; c < channels; ++c) {
    Tensor plane({in_h, in_w},
                 std::vector<float>(image.data() + c * in_h * in_w,
                                    image.data() + (c + 1) * in_h * in_w));
    const Tensor resized = resize_bilinear(plane, out_h, out_w);
    std::copy(resized.values().begin(), resized.values().end(), out.data() + c * out_h * out_w);
  }
  return out;
}

Tensor fit_to_input(const Tensor& image, const PreprocessConfig& cfg) {
  cfg.validate();
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw Error(ErrorCode::kShapeMismatch, "expected a (3,H,W) image, got " +
                                               shape_string(image.shape()));
  }
  const std::size_t h = image.dim(1), w = image.dim(2);
  std::size_t rh = cfg.resize_shorter, rw = cfg.resize_shorter;
  if (h < w) {
    rw = static_cast<std::size_t>(std::lround(static_cast<double>(w) * cfg.resize_shorter / h));
  } else if (w < h) {
    rh = static_cast<std::size_t>(std::lround(static_cast<double>(h) * cfg.resize_shorter / w));
  }
  const Tensor resized = resize_image(image, rh, rw);
  if (rh == cfg.target_h && rw == cfg.target_w) return resized;
  const std::size_t top = (rh - cfg.target_h) / 2, left = (rw - cfg.target_w) / 2;
  Tensor out({3, cfg.target_h, cfg.target_w});
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < cfg.target_h; ++y) {
      for (std::size_t x = 0; x < cfg.target_w; ++x) {
        out.at(c, y, x) = resized.at(c, top + y, left + x);
      }
    }
  }
  return out;
}

Tensor normalize_channels(const Tensor& image, const PreprocessConfig& cfg) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw Error(ErrorCode::kShapeMismatch, "expected a (3,H,W) image, got " +
                                               shape_string(image.shape()));
  }
  Tensor out = image;
  const std::size_t plane = image.dim(1) * image.dim(2);
  for (std::size_t c = 0; c < 3; ++c) {
    float* p = out.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] = (p[i] - cfg.mean[c]) / cfg.std[c];
  }
  return out;
}

Tensor preprocess(const Tensor& image, const PreprocessConfig& cfg) {
  return normalize_channels(fit_to_input(image, cfg), cfg);
}

}  // namespace lisaliency
