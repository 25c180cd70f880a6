#include "vaguegan/filters.hpp"

#include <algorithm>
#include <cstddef>

namespace vaguegan {

namespace {

inline int clamp_index(int i, int n) { return std::clamp(i, 0, n - 1); }

}  // namespace

void laplacian_plane(std::span<const double> in, int height, int width,
                     std::span<double> out) {
  auto at = [&](int y, int x) {
    return in[static_cast<std::size_t>(clamp_index(y, height)) * width +
              clamp_index(x, width)];
  };
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      out[static_cast<std::size_t>(y) * width + x] =
          at(y - 1, x) + at(y + 1, x) + at(y, x - 1) + at(y, x + 1) -
          4.0 * at(y, x);
    }
  }
}

void laplacian_plane_adjoint(std::span<const double> grad_out, int height,
                             int width, std::span<double> grad_in) {
  auto add = [&](int y, int x, double v) {
    grad_in[static_cast<std::size_t>(clamp_index(y, height)) * width +
            clamp_index(x, width)] += v;
  };
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double g = grad_out[static_cast<std::size_t>(y) * width + x];
      add(y - 1, x, g);
      add(y + 1, x, g);
      add(y, x - 1, g);
      add(y, x + 1, g);
      add(y, x, -4.0 * g);
    }
  }
}

}  // namespace vaguegan
