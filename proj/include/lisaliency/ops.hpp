#pragma once

#include <cstddef>

#include "lisaliency/tensor.hpp"

namespace lisaliency {

struct Conv2dParams {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

/// Convolution weights (out_channels, in_channels, kh, kw) with odd kh and kw,
/// so every output sits on a well-defined input centre, plus a bias per
/// output channel.
class ConvKernel {
 public:
  ConvKernel(Tensor weights, Tensor bias);

  const Tensor& weights() const noexcept { return weights_; }
  const Tensor& bias() const noexcept { return bias_; }
  std::size_t out_channels() const { return weights_.dim(0); }
  std::size_t in_channels() const { return weights_.dim(1); }
  std::size_t kernel_h() const { return weights_.dim(2); }
  std::size_t kernel_w() const { return weights_.dim(3); }

 private:
  Tensor weights_;
  Tensor bias_;
};

// Output spatial extent of a convolution; throws unless it is a positive
// integer.
std::size_t conv_output_extent(std::size_t in, std::size_t kernel,
                               Conv2dParams params);

// im2col + GEMM convolution. Input (C, H, W), weights (O, C, kh, kw),
// bias (O). Output (O, H', W').
Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              Conv2dParams params);
Tensor conv2d(const Tensor& input, const ConvKernel& kernel, Conv2dParams params);

// Reference direct convolution with 64-bit accumulation.
Tensor conv2d_direct(const Tensor& input, const Tensor& weights,
                     const Tensor& bias, Conv2dParams params);

struct Conv2dGrads {
  Tensor input;    // empty unless requested
  Tensor weights;  // empty unless requested
  Tensor bias;     // empty unless requested
};

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weights,
                            const Tensor& grad_output, Conv2dParams params,
                            bool need_input_grad, bool need_param_grads);

Tensor relu(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& grad_output);

// Non-overlapping max pooling; window must equal stride and divide H and W.
Tensor maxpool2d(const Tensor& input, std::size_t window, std::size_t stride);
Tensor maxpool2d_backward(const Tensor& input, const Tensor& grad_output,
                          std::size_t window, std::size_t stride);

// output = weights (M, N) * input (N) + bias (M).
Tensor fully_connected(const Tensor& input, const Tensor& weights,
                       const Tensor& bias);

struct FullyConnectedGrads {
  Tensor input;
  Tensor weights;
  Tensor bias;
};

FullyConnectedGrads fully_connected_backward(const Tensor& input,
                                             const Tensor& weights,
                                             const Tensor& grad_output,
                                             bool need_input_grad,
                                             bool need_param_grads);

Tensor softmax(const Tensor& input);
// Vector-Jacobian product given the softmax *output*.
Tensor softmax_backward(const Tensor& output, const Tensor& grad_output);

// -log softmax(logits)[label], computed through log-sum-exp.
float softmax_cross_entropy(const Tensor& logits, std::size_t label);
Tensor softmax_cross_entropy_backward(const Tensor& logits, std::size_t label);

}  // namespace lisaliency
