#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace vaguegan {

// Dense channel-major (C x H x W) array of doubles. This is the storage for
// every image-like quantity in the pipeline: GAN-domain images, perturbations,
// edge maps and intermediate activations.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int channels, int height, int width, double fill = 0.0);

  int channels() const noexcept { return channels_; }
  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t plane() const noexcept {
    return static_cast<std::size_t>(height_) * width_;
  }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(int c, int y, int x) noexcept {
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }
  double operator()(int c, int y, int x) const noexcept {
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }
  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  std::span<double> channel(int c) noexcept {
    return std::span<double>(data_).subspan(c * plane(), plane());
  }
  std::span<const double> channel(int c) const noexcept {
    return std::span<const double>(data_).subspan(c * plane(), plane());
  }

  bool same_shape(const Tensor& other) const noexcept {
    return channels_ == other.channels_ && height_ == other.height_ &&
           width_ == other.width_;
  }
  std::string shape_string() const;

  bool operator==(const Tensor& other) const = default;

 private:
  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

// GAN-domain image: 3 channels, entries in [-1, 1].
using ImageTensor = Tensor;

// Additive perturbation with its l-infinity budget; |values| <= eps holds for
// everything produced by the poisoner.
struct Perturbation {
  Tensor values;
  double eps = 0.0;
};

// Throws ShapeError unless a and b have identical shapes.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

// Throws InvalidTensorError on NaN/Inf or values outside [-1, 1], or
// ShapeError when the tensor is not 3-channel.
void require_image_tensor(const Tensor& t, const char* what);

bool all_finite(std::span<const double> values) noexcept;
double max_abs(std::span<const double> values) noexcept;

}  // namespace vaguegan
