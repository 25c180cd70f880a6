#include "vaguegan/layers.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "vaguegan/errors.hpp"

namespace vaguegan::nn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

int out_extent(int in, int stride) { return (in + 2 - 3) / stride + 1; }

// Unfolds 3x3 patches into a (C*9) x (Ho*Wo) matrix.
RowMatrix im2col(const Tensor& in, int stride, int out_h, int out_w) {
  const int channels = in.channels(), h = in.height(), w = in.width();
  RowMatrix col(channels * 9, out_h * out_w);
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        double* row = col.row((c * 3 + ky) * 3 + kx).data();
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride + ky - 1;
          double* dst = row + oy * out_w;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + out_w, 0.0);
            continue;
          }
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride + kx - 1;
            dst[ox] = (ix < 0 || ix >= w) ? 0.0 : in(c, iy, ix);
          }
        }
      }
    }
  }
  return col;
}

void col2im(const RowMatrix& col, int stride, int out_h, int out_w, Tensor& out) {
  const int channels = out.channels(), h = out.height(), w = out.width();
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const double* row = col.row((c * 3 + ky) * 3 + kx).data();
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride + ky - 1;
          if (iy < 0 || iy >= h) continue;
          const double* src = row + oy * out_w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride + kx - 1;
            if (ix >= 0 && ix < w) out(c, iy, ix) += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv3x3_forward(const Tensor& in, std::span<const double> weight,
                       std::span<const double> bias, int out_channels, int stride) {
  const int k = in.channels() * 9;
  if (weight.size() != static_cast<std::size_t>(out_channels) * k ||
      bias.size() != static_cast<std::size_t>(out_channels)) {
    throw ShapeError("conv3x3: weight shape does not match input " + in.shape_string());
  }
  const int out_h = out_extent(in.height(), stride);
  const int out_w = out_extent(in.width(), stride);
  const RowMatrix col = im2col(in, stride, out_h, out_w);
  // Operands are copied into Eigen-owned (aligned) storage so the kernels'
  // summation order never depends on the caller's buffer alignment.
  const RowMatrix wm = ConstMatrixMap(weight.data(), out_channels, k);
  RowMatrix y(out_channels, out_h * out_w);
  y.noalias() = wm * col;
  Tensor out(out_channels, out_h, out_w);
  for (int o = 0; o < out_channels; ++o) {
    double* dst = out.data() + static_cast<std::size_t>(o) * y.cols();
    for (Eigen::Index i = 0; i < y.cols(); ++i) dst[i] = y(o, i) + bias[o];
  }
  return out;
}

void conv3x3_backward(const Tensor& in, std::span<const double> weight,
                      int out_channels, int stride, const Tensor& grad_out,
                      std::span<double> grad_weight, std::span<double> grad_bias,
                      Tensor* grad_in) {
  const int k = in.channels() * 9;
  const int out_h = grad_out.height(), out_w = grad_out.width();
  const Eigen::Index n = static_cast<Eigen::Index>(out_h) * out_w;
  if (!grad_bias.empty()) {
    for (int o = 0; o < out_channels; ++o) {
      const double* row = grad_out.data() + static_cast<std::size_t>(o) * n;
      double s = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) s += row[i];
      grad_bias[o] += s;
    }
  }
  const bool need_weight = !grad_weight.empty();
  if (!need_weight && grad_in == nullptr) return;
  const RowMatrix dy = ConstMatrixMap(grad_out.data(), out_channels, n);
  const RowMatrix col = im2col(in, stride, out_h, out_w);
  if (need_weight) {
    RowMatrix dw(out_channels, k);
    dw.noalias() = dy * col.transpose();
    MatrixMap(grad_weight.data(), out_channels, k) += dw;
  }
  if (grad_in != nullptr) {
    const RowMatrix wm = ConstMatrixMap(weight.data(), out_channels, k);
    RowMatrix dcol(k, n);
    dcol.noalias() = wm.transpose() * dy;
    *grad_in = Tensor(in.channels(), in.height(), in.width());
    col2im(dcol, stride, out_h, out_w, *grad_in);
  }
}

void linear_forward(std::span<const double> in, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> out) {
  if (weight.size() != out.size() * in.size() || bias.size() != out.size()) {
    throw ShapeError("linear: weight shape does not match input");
  }
  const std::size_t n_in = in.size();
  for (std::size_t o = 0; o < out.size(); ++o) {
    const double* w = weight.data() + o * n_in;
    double s = 0.0;
    for (std::size_t i = 0; i < n_in; ++i) s += w[i] * in[i];
    out[o] = s + bias[o];
  }
}

void linear_backward(std::span<const double> in, std::span<const double> grad_out,
                     std::span<double> grad_weight, std::span<double> grad_bias) {
  const std::size_t n_in = in.size();
  for (std::size_t o = 0; o < grad_out.size(); ++o) {
    double* w = grad_weight.data() + o * n_in;
    for (std::size_t i = 0; i < n_in; ++i) w[i] += grad_out[o] * in[i];
    grad_bias[o] += grad_out[o];
  }
}

double sigmoid(double v) noexcept {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

void activate(Tensor& t, Activation act) {
  switch (act) {
    case Activation::kNone:
      return;
    case Activation::kRelu:
      for (double& v : t.values()) v = v > 0.0 ? v : 0.0;
      return;
    case Activation::kLeakyRelu:
      for (double& v : t.values()) v = v > 0.0 ? v : kLeakySlope * v;
      return;
    case Activation::kTanh:
      for (double& v : t.values()) v = std::tanh(v);
      return;
    case Activation::kSigmoid:
      for (double& v : t.values()) v = sigmoid(v);
      return;
  }
}

void activation_backward(const Tensor& activated, Activation act, Tensor& grad) {
  const auto y = activated.values();
  auto g = grad.values();
  switch (act) {
    case Activation::kNone:
      return;
    case Activation::kRelu:
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = y[i] > 0.0 ? g[i] : 0.0;
      return;
    case Activation::kLeakyRelu:
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= y[i] > 0.0 ? 1.0 : kLeakySlope;
      return;
    case Activation::kTanh:
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - y[i] * y[i];
      return;
    case Activation::kSigmoid:
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= y[i] * (1.0 - y[i]);
      return;
  }
}

}  // namespace vaguegan::nn
