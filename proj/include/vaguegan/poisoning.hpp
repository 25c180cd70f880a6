#pragma once

#include "vaguegan/random.hpp"
#include "vaguegan/tensor.hpp"

namespace vaguegan::poison {

struct PoisonDecision {
  bool poisoned = false;
  ImageTensor sample;
};

// Square trigger patch anchored at the bottom-right corner.
struct TriggerConfig {
  int patch_side = 8;
  double value = 1.0;
};

// clamp(x + delta, -1, 1) elementwise.
ImageTensor apply_perturbation(const ImageTensor& x, const Perturbation& d);

// Draws u ~ U[0,1) from rng; poisoned iff u < alpha.
PoisonDecision maybe_poison(const ImageTensor& x0, const Perturbation& d, double alpha,
                            RandomStream& rng);

// Mean of squared differences.
double stealth_mse(const ImageTensor& xp, const ImageTensor& x);

// Anisotropic total variation, summed over channels and in-bounds neighbour
// pairs (no normalisation).
double total_variation(const Perturbation& d);

// mean(|laplacian(delta)|) with the 4-neighbour stencil and replicate padding.
double laplacian_energy(const Perturbation& d);

ImageTensor inject_trigger(const ImageTensor& x, const TriggerConfig& t);

// Gradients used by the poisoner objective. Each accumulates scale * dF/d(.)
// into `grad`. At a kink of |.| the subgradient 0 is used.
void stealth_mse_grad(const ImageTensor& xp, const ImageTensor& x, double scale, Tensor& grad);
void total_variation_grad(const Tensor& delta, double scale, Tensor& grad);
void laplacian_energy_grad(const Tensor& delta, double scale, Tensor& grad);

}  // namespace vaguegan::poison
