#include "lisaliency/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

namespace lisaliency {

namespace {

using RowMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXf>;
using VectorMap = Eigen::Map<Eigen::VectorXf>;

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw Error(ErrorCode::kShapeMismatch,
                std::string(what) + " must be rank " + std::to_string(rank) +
                    ", got " + shape_string(t.shape()));
  }
}

struct ConvGeometry {
  std::size_t channels, height, width;
  std::size_t out_channels, kh, kw;
  std::size_t out_h, out_w;
  Conv2dParams params;

  std::size_t patch() const { return channels * kh * kw; }
  std::size_t pixels() const { return out_h * out_w; }
};

ConvGeometry conv_geometry(const Tensor& input, const Tensor& weights,
                           Conv2dParams params) {
  require_rank(input, 3, "conv2d input");
  require_rank(weights, 4, "conv2d weights");
  if (params.stride == 0) {
    throw Error(ErrorCode::kInvalidArgument, "conv2d stride must be positive");
  }
  if (weights.dim(1) != input.dim(0)) {
    throw Error(ErrorCode::kShapeMismatch,
                "conv2d: input has " + std::to_string(input.dim(0)) +
                    " channels but kernel expects " +
                    std::to_string(weights.dim(1)) + " (input " +
                    shape_string(input.shape()) + ", weights " +
                    shape_string(weights.shape()) + ")");
  }
  ConvGeometry g{input.dim(0), input.dim(1),   input.dim(2),
                 weights.dim(0), weights.dim(2), weights.dim(3),
                 0,              0,              params};
  g.out_h = conv_output_extent(g.height, g.kh, params);
  g.out_w = conv_output_extent(g.width, g.kw, params);
  return g;
}

void require_bias(const Tensor& bias, std::size_t n, const char* what) {
  if (bias.rank() != 1 || bias.dim(0) != n) {
    throw Error(ErrorCode::kShapeMismatch,
                std::string(what) + ": bias shape " + shape_string(bias.shape()) +
                    " does not match " + std::to_string(n) + " outputs");
  }
}

// cols[(c*kh + i)*kw + j][oy*out_w + ox] = input[c][oy*s + i - p][ox*s + j - p]
void im2col(const float* input, const ConvGeometry& g, float* cols) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(g.params.padding);
  const std::ptrdiff_t stride = static_cast<std::ptrdiff_t>(g.params.stride);
  const std::ptrdiff_t height = static_cast<std::ptrdiff_t>(g.height);
  const std::ptrdiff_t width = static_cast<std::ptrdiff_t>(g.width);
  for (std::size_t c = 0; c < g.channels; ++c) {
    const float* plane = input + c * g.height * g.width;
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        float* row = cols + ((c * g.kh + i) * g.kw + j) * g.pixels();
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t y =
              static_cast<std::ptrdiff_t>(oy) * stride + static_cast<std::ptrdiff_t>(i) - pad;
          float* dst = row + oy * g.out_w;
          if (y < 0 || y >= height) {
            std::fill(dst, dst + g.out_w, 0.0f);
            continue;
          }
          const float* src = plane + y * width;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const std::ptrdiff_t x =
                static_cast<std::ptrdiff_t>(ox) * stride + static_cast<std::ptrdiff_t>(j) - pad;
            dst[ox] = (x < 0 || x >= width) ? 0.0f : src[x];
          }
        }
      }
    }
  }
}

void col2im(const float* cols, const ConvGeometry& g, float* input) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(g.params.padding);
  const std::ptrdiff_t stride = static_cast<std::ptrdiff_t>(g.params.stride);
  const std::ptrdiff_t height = static_cast<std::ptrdiff_t>(g.height);
  const std::ptrdiff_t width = static_cast<std::ptrdiff_t>(g.width);
  std::fill(input, input + g.channels * g.height * g.width, 0.0f);
  for (std::size_t c = 0; c < g.channels; ++c) {
    float* plane = input + c * g.height * g.width;
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const float* row = cols + ((c * g.kh + i) * g.kw + j) * g.pixels();
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t y =
              static_cast<std::ptrdiff_t>(oy) * stride + static_cast<std::ptrdiff_t>(i) - pad;
          if (y < 0 || y >= height) continue;
          const float* src = row + oy * g.out_w;
          float* dst = plane + y * width;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const std::ptrdiff_t x =
                static_cast<std::ptrdiff_t>(ox) * stride + static_cast<std::ptrdiff_t>(j) - pad;
            if (x >= 0 && x < width) dst[x] += src[ox];
          }
        }
      }
    }
  }
}

bool is_pointwise(const ConvGeometry& g) {
  return g.kh == 1 && g.kw == 1 && g.params.stride == 1 && g.params.padding == 0;
}

}  // namespace

ConvKernel::ConvKernel(Tensor weights, Tensor bias)
    : weights_(std::move(weights)), bias_(std::move(bias)) {
  require_rank(weights_, 4, "conv kernel weights");
  if (weights_.dim(2) % 2 == 0 || weights_.dim(3) % 2 == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "conv kernel spatial dims must be odd, got " +
                    shape_string(weights_.shape()));
  }
  require_bias(bias_, weights_.dim(0), "conv kernel");
}

std::size_t conv_output_extent(std::size_t in, std::size_t kernel,
                               Conv2dParams params) {
  const std::size_t padded = in + 2 * params.padding;
  if (params.stride == 0 || padded < kernel ||
      (padded - kernel) % params.stride != 0) {
    throw Error(ErrorCode::kShapeMismatch,
                "conv2d: extent " + std::to_string(in) + " with kernel " +
                    std::to_string(kernel) + ", padding " +
                    std::to_string(params.padding) + ", stride " +
                    std::to_string(params.stride) +
                    " does not give an integral output size");
  }
  return (padded - kernel) / params.stride + 1;
}

Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              Conv2dParams params) {
  const ConvGeometry g = conv_geometry(input, weights, params);
  require_bias(bias, g.out_channels, "conv2d");

  Tensor output({g.out_channels, g.out_h, g.out_w});
  std::vector<float> cols;
  const float* col_data = input.data();
  if (!is_pointwise(g)) {
    cols.resize(g.patch() * g.pixels());
    im2col(input.data(), g, cols.data());
    col_data = cols.data();
  }
  ConstMatrixMap w(weights.data(), g.out_channels, g.patch());
  ConstMatrixMap c(col_data, g.patch(), g.pixels());
  MatrixMap out(output.data(), g.out_channels, g.pixels());
  out.noalias() = w * c;
  for (std::size_t o = 0; o < g.out_channels; ++o) {
    out.row(o).array() += bias[o];
  }
  require_finite(output, "conv2d");
  return output;
}

Tensor conv2d(const Tensor& input, const ConvKernel& kernel, Conv2dParams params) {
  return conv2d(input, kernel.weights(), kernel.bias(), params);
}

Tensor conv2d_direct(const Tensor& input, const Tensor& weights,
                     const Tensor& bias, Conv2dParams params) {
  const ConvGeometry g = conv_geometry(input, weights, params);
  require_bias(bias, g.out_channels, "conv2d");
  Tensor output({g.out_channels, g.out_h, g.out_w});
  const auto pad = static_cast<std::ptrdiff_t>(g.params.padding);
  for (std::size_t o = 0; o < g.out_channels; ++o) {
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
      for (std::size_t ox = 0; ox < g.out_w; ++ox) {
        double acc = bias[o];
        for (std::size_t c = 0; c < g.channels; ++c) {
          for (std::size_t i = 0; i < g.kh; ++i) {
            const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * params.stride + i) - pad;
            if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.height)) continue;
            for (std::size_t j = 0; j < g.kw; ++j) {
              const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(ox * params.stride + j) - pad;
              if (x < 0 || x >= static_cast<std::ptrdiff_t>(g.width)) continue;
              acc += static_cast<double>(weights[((o * g.channels + c) * g.kh + i) * g.kw + j]) *
                     input.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
            }
          }
        }
        output.at(o, oy, ox) = static_cast<float>(acc);
      }
    }
  }
  require_finite(output, "conv2d_direct");
  return output;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weights,
                            const Tensor& grad_output, Conv2dParams params,
                            bool need_input_grad, bool need_param_grads) {
  const ConvGeometry g = conv_geometry(input, weights, params);
  if (grad_output.shape() != Shape{g.out_channels, g.out_h, g.out_w}) {
    throw Error(ErrorCode::kShapeMismatch,
                "conv2d_backward: grad_output shape " +
                    shape_string(grad_output.shape()) + " is not " +
                    shape_string({g.out_channels, g.out_h, g.out_w}));
  }
  Conv2dGrads grads;
  ConstMatrixMap dy(grad_output.data(), g.out_channels, g.pixels());
  ConstMatrixMap w(weights.data(), g.out_channels, g.patch());
  const bool pointwise = is_pointwise(g);

  if (need_param_grads) {
    std::vector<float> cols;
    const float* col_data = input.data();
    if (!pointwise) {
      cols.resize(g.patch() * g.pixels());
      im2col(input.data(), g, cols.data());
      col_data = cols.data();
    }
    ConstMatrixMap c(col_data, g.patch(), g.pixels());
    grads.weights = Tensor(weights.shape());
    MatrixMap dw(grads.weights.data(), g.out_channels, g.patch());
    dw.noalias() = dy * c.transpose();
    grads.bias = Tensor({g.out_channels});
    for (std::size_t o = 0; o < g.out_channels; ++o) {
      double acc = 0.0;
      const float* row = grad_output.data() + o * g.pixels();
      for (std::size_t n = 0; n < g.pixels(); ++n) acc += row[n];
      grads.bias[o] = static_cast<float>(acc);
    }
  }
  if (need_input_grad) {
    grads.input = Tensor(input.shape());
    if (pointwise) {
      MatrixMap dx(grads.input.data(), g.channels, g.pixels());
      dx.noalias() = w.transpose() * dy;
    } else {
      std::vector<float> dcols(g.patch() * g.pixels());
      MatrixMap dc(dcols.data(), g.patch(), g.pixels());
      dc.noalias() = w.transpose() * dy;
      col2im(dcols.data(), g, grads.input.data());
    }
  }
  return grads;
}

Tensor relu(const Tensor& input) {
  require_finite(input, "relu");
  Tensor output = input;
  for (float& v : output.values()) v = v > 0.0f ? v : 0.0f;
  return output;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_output) {
  require_same_shape(input, grad_output, "relu_backward");
  Tensor grad = grad_output;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(input[i] > 0.0f)) grad[i] = 0.0f;
  }
  return grad;
}

namespace {

void check_pool(const Tensor& input, std::size_t window, std::size_t stride) {
  require_rank(input, 3, "maxpool2d input");
  if (window == 0 || window != stride) {
    throw Error(ErrorCode::kInvalidArgument,
                "maxpool2d supports non-overlapping windows only (window == stride)");
  }
  if (input.dim(1) % stride != 0 || input.dim(2) % stride != 0) {
    throw Error(ErrorCode::kShapeMismatch,
                "maxpool2d: spatial dims of " + shape_string(input.shape()) +
                    " are not divisible by stride " + std::to_string(stride));
  }
}

}  // namespace

Tensor maxpool2d(const Tensor& input, std::size_t window, std::size_t stride) {
  check_pool(input, window, stride);
  require_finite(input, "maxpool2d");
  const std::size_t channels = input.dim(0);
  const std::size_t out_h = input.dim(1) / stride;
  const std::size_t out_w = input.dim(2) / stride;
  Tensor output({channels, out_h, out_w});
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        float best = -std::numeric_limits<float>::infinity();
        for (std::size_t i = 0; i < window; ++i) {
          for (std::size_t j = 0; j < window; ++j) {
            best = std::max(best, input.at(c, oy * stride + i, ox * stride + j));
          }
        }
        output.at(c, oy, ox) = best;
      }
    }
  }
  require_finite(output, "maxpool2d");
  return output;
}

Tensor maxpool2d_backward(const Tensor& input, const Tensor& grad_output,
                          std::size_t window, std::size_t stride) {
  check_pool(input, window, stride);
  const std::size_t channels = input.dim(0);
  const std::size_t out_h = input.dim(1) / stride;
  const std::size_t out_w = input.dim(2) / stride;
  if (grad_output.shape() != Shape{channels, out_h, out_w}) {
    throw Error(ErrorCode::kShapeMismatch, "maxpool2d_backward: grad_output shape " +
                                               shape_string(grad_output.shape()));
  }
  Tensor grad(input.shape());
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        // The first maximum in scan order receives the gradient.
        std::size_t by = oy * stride, bx = ox * stride;
        float best = input.at(c, by, bx);
        for (std::size_t i = 0; i < window; ++i) {
          for (std::size_t j = 0; j < window; ++j) {
            const float v = input.at(c, oy * stride + i, ox * stride + j);
            if (v > best) {
              best = v;
              by = oy * stride + i;
              bx = ox * stride + j;
            }
          }
        }
        grad.at(c, by, bx) += grad_output.at(c, oy, ox);
      }
    }
  }
  return grad;
}

namespace {

void check_fc(const Tensor& input, const Tensor& weights) {
  require_rank(input, 1, "fully_connected input");
  require_rank(weights, 2, "fully_connected weights");
  if (weights.dim(1) != input.dim(0)) {
    throw Error(ErrorCode::kShapeMismatch,
                "fully_connected: weights " + shape_string(weights.shape()) +
                    " cannot multiply input " + shape_string(input.shape()));
  }
}

}  // namespace

Tensor fully_connected(const Tensor& input, const Tensor& weights,
                       const Tensor& bias) {
  check_fc(input, weights);
  require_bias(bias, weights.dim(0), "fully_connected");
  Tensor output = bias;
  ConstMatrixMap w(weights.data(), weights.dim(0), weights.dim(1));
  ConstVectorMap x(input.data(), input.size());
  VectorMap y(output.data(), output.size());
  y.noalias() += w * x;
  require_finite(output, "fully_connected");
  return output;
}

FullyConnectedGrads fully_connected_backward(const Tensor& input,
                                             const Tensor& weights,
                                             const Tensor& grad_output,
                                             bool need_input_grad,
                                             bool need_param_grads) {
  check_fc(input, weights);
  if (grad_output.shape() != Shape{weights.dim(0)}) {
    throw Error(ErrorCode::kShapeMismatch,
                "fully_connected_backward: grad_output shape " +
                    shape_string(grad_output.shape()));
  }
  FullyConnectedGrads grads;
  ConstMatrixMap w(weights.data(), weights.dim(0), weights.dim(1));
  ConstVectorMap dy(grad_output.data(), grad_output.size());
  if (need_input_grad) {
    grads.input = Tensor(input.shape());
    VectorMap dx(grads.input.data(), grads.input.size());
    dx.noalias() = w.transpose() * dy;
  }
  if (need_param_grads) {
    grads.weights = Tensor(weights.shape());
    MatrixMap dw(grads.weights.data(), weights.dim(0), weights.dim(1));
    ConstVectorMap x(input.data(), input.size());
    dw.noalias() = dy * x.transpose();
    grads.bias = grad_output;
  }
  return grads;
}

Tensor softmax(const Tensor& input) {
  require_rank(input, 1, "softmax input");
  const float peak = *std::max_element(input.values().begin(), input.values().end());
  std::vector<double> e(input.size());
  double total = 0.0;
  for (std::size_t i = 0; i < input.size(); ++i) {
    e[i] = std::exp(static_cast<double>(input[i]) - peak);
    total += e[i];
  }
  Tensor output(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    output[i] = static_cast<float>(e[i] / total);
  }
  require_finite(output, "softmax");
  return output;
}

Tensor softmax_backward(const Tensor& output, const Tensor& grad_output) {
  require_same_shape(output, grad_output, "softmax_backward");
  double dot = 0.0;
  for (std::size_t i = 0; i < output.size(); ++i) {
    dot += static_cast<double>(output[i]) * grad_output[i];
  }
  Tensor grad(output.shape());
  for (std::size_t i = 0; i < output.size(); ++i) {
    grad[i] = static_cast<float>(output[i] * (grad_output[i] - dot));
  }
  return grad;
}

namespace {

double log_sum_exp(const Tensor& logits) {
  const float peak = *std::max_element(logits.values().begin(), logits.values().end());
  double total = 0.0;
  for (float v : logits.values()) total += std::exp(static_cast<double>(v) - peak);
  return peak + std::log(total);
}

void check_label(const Tensor& logits, std::size_t label) {
  require_rank(logits, 1, "cross-entropy logits");
  if (label >= logits.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "label " + std::to_string(label) + " out of range for " +
                    std::to_string(logits.size()) + " classes");
  }
}

}  // namespace

float softmax_cross_entropy(const Tensor& logits, std::size_t label) {
  check_label(logits, label);
  const double loss = log_sum_exp(logits) - logits[label];
  if (!std::isfinite(loss)) {
    throw Error(ErrorCode::kNumeric, "non-finite value produced by softmax_cross_entropy");
  }
  return static_cast<float>(loss);
}

Tensor softmax_cross_entropy_backward(const Tensor& logits, std::size_t label) {
  check_label(logits, label);
  Tensor grad = softmax(logits);
  grad[label] -= 1.0f;
  return grad;
}

}  // namespace lisaliency
