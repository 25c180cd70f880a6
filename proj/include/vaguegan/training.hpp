#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "vaguegan/config.hpp"
#include "vaguegan/networks.hpp"
#include "vaguegan/random.hpp"

namespace vaguegan::train {

inline constexpr double kProbClamp = 1e-7;

// Binary cross-entropy with p clamped to [1e-7, 1 - 1e-7].
double bce(double p, int target);
// d bce / dp; zero where the clamp is active.
double bce_grad(double p, int target);

// Learning rate for a 0-based epoch: lr * 0.5^floor(epoch / period).
double lr_at(std::int64_t epoch, const TrainingConfig& cfg);

// Bias-corrected Adam over one ParamSet.
class Adam {
 public:
  Adam() = default;
  Adam(const nn::ParamSet& like, double beta1, double beta2, double eps);

  void step(nn::ParamSet& params, const nn::ParamSet& grads, double lr);

  const nn::ParamSet& first_moment() const noexcept { return m_; }
  const nn::ParamSet& second_moment() const noexcept { return v_; }
  std::int64_t steps() const noexcept { return t_; }
  void restore(nn::ParamSet m, nn::ParamSet v, std::int64_t t);

  bool operator==(const Adam&) const = default;

 private:
  double beta1_ = 0.5, beta2_ = 0.999, eps_ = 1e-8;
  nn::ParamSet m_, v_;
  std::int64_t t_ = 0;
};

struct EpochRecord {
  std::int64_t epoch = 0;  // 1-based
  double loss_d = 0.0;
  double loss_g = 0.0;
  double loss_p = 0.0;
  bool poisoned_this_epoch = false;
  double lr_current = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainState {
  nn::ParamSet generator, discriminator, poisoner;
  Adam adam_g, adam_d, adam_p;
  std::int64_t epoch = 0;  // completed epochs
  std::vector<EpochRecord> history;
  RandomStream rng;
};

// Fresh networks and optimizers derived from cfg.seed.
TrainState init_state(const TrainingConfig& cfg);

// ------------------------------------------------------------------ losses
// Pure objective evaluations. When `grad` is non-null it receives the
// gradient with respect to that network's parameters (zeroed first).

// 1/2 [BCE(D(real), 1) + BCE(D(fake), 0)]
double discriminator_loss(const nn::ParamSet& d, const Tensor& real, const Tensor& fake,
                          nn::ParamSet* grad);

// BCE(D(G(x, z, f)), 1). `cached` may supply an existing forward trace of G.
double generator_loss(const nn::ParamSet& g, const nn::ParamSet& d, const Tensor& x,
                      std::span<const double> z, std::span<const double> f,
                      nn::ParamSet* grad, const nn::GeneratorTrace* cached = nullptr);

struct PoisonObjective {
  double eps = 0.08;
  double lambda_stealth = 1.0;
  double lambda_tv = 1e-3;
  double lambda_hf = 1e-2;
  int adv_sign = 1;

  static PoisonObjective from(const TrainingConfig& cfg);
};

struct PoisonLoss {
  double total = 0.0;
  double adversarial = 0.0;  // BCE(D(x'), 1), before the sign
  double stealth = 0.0;
  double tv = 0.0;
  double laplacian = 0.0;
};

// adv_sign * BCE(D(x'), 1) + l_s * MSE(x', x0) + l_tv * TV(delta) - l_hf * Lap(delta)
// with delta = P(x0, z_p) and x' = clip(x0 + delta).
PoisonLoss poisoner_loss(const nn::ParamSet& p, const nn::ParamSet& d, const Tensor& x0,
                         std::span<const double> z_p, const PoisonObjective& obj,
                         nn::ParamSet* grad);

// ------------------------------------------------------------------- steps
// Each mutates exactly one network (and its optimizer) and returns the loss
// evaluated before the update. A non-finite loss or parameter throws
// NonFiniteError and leaves the state untouched.

double discriminator_step(TrainState& s, const TrainingConfig& cfg, const Tensor& x_real,
                          std::span<const double> z, std::span<const double> f, double lr);
double discriminator_update(TrainState& s, const Tensor& x_real, const Tensor& x_fake,
                            double lr);
double generator_step(TrainState& s, const TrainingConfig& cfg, const Tensor& x,
                      std::span<const double> z, std::span<const double> f, double lr,
                      const nn::GeneratorTrace* cached = nullptr);
double poisoner_step(TrainState& s, const TrainingConfig& cfg, const Tensor& x0,
                     std::span<const double> z_p, double lr);

// -------------------------------------------------------------------- loop

struct SampleRecord {
  std::int64_t epoch = 0;  // 1-based
  int index = 0;           // dataset index of the clean source
  bool poisoned = false;
  const ImageTensor* clean = nullptr;
  const ImageTensor* sample = nullptr;  // what D and G were trained on
};

struct TrainOptions {
  // When set: config.json, metrics.csv, dataset.npy, samples.npy/.csv and
  // checkpoints are written here.
  std::filesystem::path run_dir;
  std::function<void(const SampleRecord&)> on_sample;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  TrainState state;
  std::vector<EpochRecord> records;
  std::filesystem::path final_checkpoint;  // empty without run_dir
};

TrainResult train(const TrainingConfig& cfg, std::span<const ImageTensor> dataset,
                  const TrainOptions& options = {});

// Resolves cfg.images into GAN-domain tensors at cfg.image_side. Relative
// paths are taken against `base_dir`. "synthetic:<n>" yields synthetic_scene.
std::vector<ImageTensor> load_dataset(const TrainingConfig& cfg,
                                      const std::filesystem::path& base_dir = {});

}  // namespace vaguegan::train
