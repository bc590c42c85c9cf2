#pragma once

#include <vector>

#include "spmseg/unet/tensor.hpp"

namespace spmseg::nn {

// Same-padded (zero border of k/2), stride-1 convolution with an odd square
// kernel. weight: (out, in, k, k); bias: (1, out, 1, 1).
Tensor4 conv2d_forward(const Tensor4& x, const Tensor4& weight, const Tensor4& bias);

struct Conv2dGrads {
  Tensor4 dx;
  Tensor4 dweight;
  Tensor4 dbias;
};
Conv2dGrads conv2d_backward(const Tensor4& x, const Tensor4& weight, const Tensor4& dy);

struct MaxPoolOutput {
  Tensor4 y;
  std::vector<std::size_t> argmax;  // flat index into x for every element of y
};
// 2x2 window, stride 2; H and W must be even. Ties go to the first element
// in row-major window order.
MaxPoolOutput maxpool2x2_forward(const Tensor4& x);
Tensor4 maxpool2x2_backward(const Shape4& x_shape, const std::vector<std::size_t>& argmax,
                            const Tensor4& dy);

// Transposed 2x2 convolution with stride 2 (doubles H and W).
// weight: (in, out, 2, 2); bias: (1, out, 1, 1).
Tensor4 upconv2x2_forward(const Tensor4& x, const Tensor4& weight, const Tensor4& bias);
struct UpConvGrads {
  Tensor4 dx;
  Tensor4 dweight;
  Tensor4 dbias;
};
UpConvGrads upconv2x2_backward(const Tensor4& x, const Tensor4& weight, const Tensor4& dy);

Tensor4 relu_forward(const Tensor4& x);
// Gradient is passed where x > 0.
Tensor4 relu_backward(const Tensor4& x, const Tensor4& dy);

Tensor4 sigmoid_forward(const Tensor4& x);
Tensor4 sigmoid_backward(const Tensor4& y, const Tensor4& dy);

// Channel concatenation [a | b]; batch and spatial dims must agree.
Tensor4 concat_channels(const Tensor4& a, const Tensor4& b);
struct ConcatGrads {
  Tensor4 da;
  Tensor4 db;
};
ConcatGrads concat_channels_backward(const Tensor4& dy, int channels_a);

// Mean per-pixel binary cross-entropy of probabilities p against targets in
// {0, 1} (or [0, 1]); p is clamped to [1e-12, 1 - 1e-12].
double bce_loss(const Tensor4& p, const Tensor4& target);
Tensor4 bce_loss_backward(const Tensor4& p, const Tensor4& target);

// Numerically stable fused sigmoid + BCE on logits; returns the mean loss
// and writes d(loss)/d(logits) into `grad` when non-null.
double bce_with_logits(const Tensor4& logits, const Tensor4& target, Tensor4* grad);

}  // namespace spmseg::nn
