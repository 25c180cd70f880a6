#include "vaguegan/tensor.hpp"

#include <cmath>
#include <sstream>

#include "vaguegan/errors.hpp"

namespace vaguegan {

Tensor::Tensor(int channels, int height, int width, double fill)
    : channels_(channels), height_(height), width_(width) {
  if (channels < 0 || height < 0 || width < 0) {
    throw ShapeError("negative tensor dimension");
  }
  data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << '(' << channels_ << ',' << height_ << ',' << width_ << ')';
  return os.str();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_string() +
                     " vs " + b.shape_string());
  }
}

void require_image_tensor(const Tensor& t, const char* what) {
  if (t.channels() != 3 || t.height() <= 0 || t.width() <= 0) {
    throw ShapeError(std::string(what) + ": expected 3xHxW image, got " +
                     t.shape_string());
  }
  for (double v : t.values()) {
    if (!std::isfinite(v)) {
      throw InvalidTensorError(std::string(what) + ": non-finite pixel");
    }
    if (v < -1.0 || v > 1.0) {
      throw InvalidTensorError(std::string(what) + ": pixel outside [-1,1]");
    }
  }
}

bool all_finite(std::span<const double> values) noexcept {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double max_abs(std::span<const double> values) noexcept {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace vaguegan
