#pragma once

#include <span>

#include "vaguegan/tensor.hpp"

// Differentiable building blocks shared by the three networks. Convolutions
// are fixed to 3x3 kernels with zero padding 1; weights are laid out
// (out, in, 3, 3) row-major.
namespace vaguegan::nn {

Tensor conv3x3_forward(const Tensor& in, std::span<const double> weight,
                       std::span<const double> bias, int out_channels, int stride);

// Accumulates dL/dW and dL/db into grad_weight / grad_bias (either may be
// empty to skip) and, when grad_in is non-null, writes dL/d(in).
void conv3x3_backward(const Tensor& in, std::span<const double> weight,
                      int out_channels, int stride, const Tensor& grad_out,
                      std::span<double> grad_weight, std::span<double> grad_bias,
                      Tensor* grad_in);

// y = W x + b with W stored (out, in) row-major.
void linear_forward(std::span<const double> in, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> out);

void linear_backward(std::span<const double> in, std::span<const double> grad_out,
                     std::span<double> grad_weight, std::span<double> grad_bias);

enum class Activation { kNone, kRelu, kLeakyRelu, kTanh, kSigmoid };

inline constexpr double kLeakySlope = 0.2;

void activate(Tensor& t, Activation act);

// Multiplies grad by the activation derivative, expressed through the
// activation's output (valid for every Activation above).
void activation_backward(const Tensor& activated, Activation act, Tensor& grad);

double sigmoid(double v) noexcept;

}  // namespace vaguegan::nn
