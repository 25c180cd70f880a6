#include "vaguegan/poisoning.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "vaguegan/errors.hpp"
#include "vaguegan/filters.hpp"

namespace vaguegan::poison {

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

ImageTensor apply_perturbation(const ImageTensor& x, const Perturbation& d) {
  require_same_shape(x, d.values, "apply_perturbation");
  ImageTensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::clamp(x[i] + d.values[i], -1.0, 1.0);
  }
  return out;
}

PoisonDecision maybe_poison(const ImageTensor& x0, const Perturbation& d, double alpha,
                            RandomStream& rng) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw InvalidConfigError("poison_rate", "must lie in [0, 1]");
  }
  const double u = rng.uniform();
  if (u < alpha) return {true, apply_perturbation(x0, d)};
  return {false, x0};
}

double stealth_mse(const ImageTensor& xp, const ImageTensor& x) {
  require_same_shape(xp, x, "stealth_mse");
  if (x.size() == 0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double diff = xp[i] - x[i];
    s += diff * diff;
  }
  return s / static_cast<double>(x.size());
}

double total_variation(const Perturbation& d) {
  const Tensor& t = d.values;
  double s = 0.0;
  for (int c = 0; c < t.channels(); ++c) {
    for (int y = 0; y < t.height(); ++y) {
      for (int x = 0; x < t.width(); ++x) {
        if (x + 1 < t.width()) s += std::abs(t(c, y, x + 1) - t(c, y, x));
        if (y + 1 < t.height()) s += std::abs(t(c, y + 1, x) - t(c, y, x));
      }
    }
  }
  return s;
}

double laplacian_energy(const Perturbation& d) {
  const Tensor& t = d.values;
  if (t.size() == 0) return 0.0;
  std::vector<double> response(t.plane());
  double s = 0.0;
  for (int c = 0; c < t.channels(); ++c) {
    laplacian_plane(t.channel(c), t.height(), t.width(), response);
    for (double v : response) s += std::abs(v);
  }
  return s / static_cast<double>(t.size());
}

ImageTensor inject_trigger(const ImageTensor& x, const TriggerConfig& t) {
  if (t.patch_side < 0 || t.patch_side > x.height() || t.patch_side > x.width()) {
    throw InvalidConfigError("trigger.patch_side", "patch must fit inside the image");
  }
  ImageTensor out = x;
  for (int c = 0; c < out.channels(); ++c) {
    for (int y = out.height() - t.patch_side; y < out.height(); ++y) {
      for (int x = out.width() - t.patch_side; x < out.width(); ++x) out(c, y, x) = t.value;
    }
  }
  return out;
}

void stealth_mse_grad(const ImageTensor& xp, const ImageTensor& x, double scale, Tensor& grad) {
  const double k = 2.0 * scale / static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) grad[i] += k * (xp[i] - x[i]);
}

void total_variation_grad(const Tensor& t, double scale, Tensor& grad) {
  for (int c = 0; c < t.channels(); ++c) {
    for (int y = 0; y < t.height(); ++y) {
      for (int x = 0; x < t.width(); ++x) {
        if (x + 1 < t.width()) {
          const double g = scale * sign(t(c, y, x + 1) - t(c, y, x));
          grad(c, y, x + 1) += g;
          grad(c, y, x) -= g;
        }
        if (y + 1 < t.height()) {
          const double g = scale * sign(t(c, y + 1, x) - t(c, y, x));
          grad(c, y + 1, x) += g;
          grad(c, y, x) -= g;
        }
      }
    }
  }
}

void laplacian_energy_grad(const Tensor& t, double scale, Tensor& grad) {
  std::vector<double> response(t.plane());
  const double k = scale / static_cast<double>(t.size());
  for (int c = 0; c < t.channels(); ++c) {
    laplacian_plane(t.channel(c), t.height(), t.width(), response);
    for (double& v : response) v = k * sign(v);
    laplacian_plane_adjoint(response, t.height(), t.width(), grad.channel(c));
  }
}

}  // namespace vaguegan::poison
