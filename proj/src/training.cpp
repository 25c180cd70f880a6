#include "vaguegan/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "vaguegan/checkpoint.hpp"
#include "vaguegan/errors.hpp"
#include "vaguegan/image.hpp"
#include "vaguegan/npy.hpp"
#include "vaguegan/poisoning.hpp"

namespace vaguegan::train {

namespace fs = std::filesystem;
using nn::ParamSet;

double bce(double p, int target) {
  const double q = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  return target == 1 ? -std::log(q) : -std::log(1.0 - q);
}

double bce_grad(double p, int target) {
  if (p < kProbClamp || p > 1.0 - kProbClamp) return 0.0;
  return target == 1 ? -1.0 / p : 1.0 / (1.0 - p);
}

double lr_at(std::int64_t epoch, const TrainingConfig& cfg) {
  return cfg.lr * std::pow(0.5, static_cast<double>(epoch / cfg.lr_halving_period));
}

// -------------------------------------------------------------------- Adam

Adam::Adam(const ParamSet& like, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps), m_(like.zeros_like()), v_(like.zeros_like()) {}

void Adam::step(ParamSet& params, const ParamSet& grads, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto ps = params.params();
  auto gs = grads.params();
  auto ms = m_.params();
  auto vs = v_.params();
  for (std::size_t k = 0; k < ps.size(); ++k) {
    auto& w = ps[k].values;
    const auto& g = gs[k].values;
    auto& m = ms[k].values;
    auto& v = vs[k].values;
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

void Adam::restore(ParamSet m, ParamSet v, std::int64_t t) {
  m_ = std::move(m);
  v_ = std::move(v);
  t_ = t;
}

TrainState init_state(const TrainingConfig& cfg) {
  cfg.validate();
  TrainState s;
  s.generator = nn::init_params(nn::NetworkId::kGenerator, cfg.seed, cfg.image_side);
  s.discriminator = nn::init_params(nn::NetworkId::kDiscriminator, cfg.seed, cfg.image_side);
  s.poisoner = nn::init_params(nn::NetworkId::kPoisoner, cfg.seed, cfg.image_side);
  s.adam_g = Adam(s.generator, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  s.adam_d = Adam(s.discriminator, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  s.adam_p = Adam(s.poisoner, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  s.rng = RandomStream(mix_seed(cfg.seed, 0x7a1));
  return s;
}

// ------------------------------------------------------------------ losses

double discriminator_loss(const ParamSet& d, const Tensor& real, const Tensor& fake,
                          ParamSet* grad) {
  const auto real_trace = nn::discriminator_trace(d, real);
  const auto fake_trace = nn::discriminator_trace(d, fake);
  const double p_real = real_trace.out.prob, p_fake = fake_trace.out.prob;
  const double loss = 0.5 * (bce(p_real, 1) + bce(p_fake, 0));
  if (grad != nullptr) {
    *grad = d.zeros_like();
    nn::discriminator_backward(d, real_trace, 0.5 * bce_grad(p_real, 1), grad, nullptr);
    nn::discriminator_backward(d, fake_trace, 0.5 * bce_grad(p_fake, 0), grad, nullptr);
  }
  return loss;
}

double generator_loss(const ParamSet& g, const ParamSet& d, const Tensor& x,
                      std::span<const double> z, std::span<const double> f, ParamSet* grad,
                      const nn::GeneratorTrace* cached) {
  nn::GeneratorTrace local;
  if (cached == nullptr) {
    local = nn::generator_trace(g, x, z, f);
    cached = &local;
  }
  const auto d_trace = nn::discriminator_trace(d, cached->output);
  const double p = d_trace.out.prob;
  const double loss = bce(p, 1);
  if (grad != nullptr) {
    Tensor grad_fake;
    nn::discriminator_backward(d, d_trace, bce_grad(p, 1), nullptr, &grad_fake);
    *grad = g.zeros_like();
    nn::generator_backward(g, *cached, grad_fake, *grad);
  }
  return loss;
}

PoisonObjective PoisonObjective::from(const TrainingConfig& cfg) {
  return {cfg.eps, cfg.lambda_stealth, cfg.lambda_tv, cfg.lambda_hf, cfg.poison_adv_sign};
}

PoisonLoss poisoner_loss(const ParamSet& p, const ParamSet& d, const Tensor& x0,
                         std::span<const double> z_p, const PoisonObjective& obj,
                         ParamSet* grad) {
  const auto p_trace = nn::poisoner_trace(p, x0, z_p, obj.eps);
  const Perturbation& delta = p_trace.delta;
  const ImageTensor xp = poison::apply_perturbation(x0, delta);
  const auto d_trace = nn::discriminator_trace(d, xp);
  const double prob = d_trace.out.prob;

  PoisonLoss loss;
  loss.adversarial = bce(prob, 1);
  loss.stealth = poison::stealth_mse(xp, x0);
  loss.tv = poison::total_variation(delta);
  loss.laplacian = poison::laplacian_energy(delta);
  loss.total = obj.adv_sign * loss.adversarial + obj.lambda_stealth * loss.stealth +
               obj.lambda_tv * loss.tv - obj.lambda_hf * loss.laplacian;

  if (grad != nullptr) {
    Tensor grad_xp;
    nn::discriminator_backward(d, d_trace, obj.adv_sign * bce_grad(prob, 1), nullptr, &grad_xp);
    poison::stealth_mse_grad(xp, x0, obj.lambda_stealth, grad_xp);
    Tensor grad_delta = grad_xp;
    for (std::size_t i = 0; i < grad_delta.size(); ++i) {
      const double pre = x0[i] + delta.values[i];
      if (pre < -1.0 || pre > 1.0) grad_delta[i] = 0.0;
    }
    poison::total_variation_grad(delta.values, obj.lambda_tv, grad_delta);
    poison::laplacian_energy_grad(delta.values, -obj.lambda_hf, grad_delta);
    *grad = p.zeros_like();
    nn::poisoner_backward(p, p_trace, grad_delta, *grad);
  }
  return loss;
}

// ------------------------------------------------------------------- steps

namespace {

void require_finite_update(const char* step, double loss, const ParamSet& grad) {
  if (!std::isfinite(loss)) {
    throw NonFiniteError(std::string(step) + ": non-finite loss (" + std::to_string(loss) + ")");
  }
  if (!grad.all_finite()) throw NonFiniteError(std::string(step) + ": non-finite gradient");
}

// Applies one Adam update, restoring the previous parameters and optimizer
// state if the result is not finite.
void guarded_update(const char* step, ParamSet& params, Adam& adam, const ParamSet& grad,
                    double lr) {
  const ParamSet saved_params = params;
  const Adam saved_adam = adam;
  adam.step(params, grad, lr);
  if (!params.all_finite()) {
    params = saved_params;
    adam = saved_adam;
    throw NonFiniteError(std::string(step) + ": update produced non-finite parameters");
  }
}

}  // namespace

double discriminator_update(TrainState& s, const Tensor& x_real, const Tensor& x_fake,
                            double lr) {
  ParamSet grad;
  const double loss = discriminator_loss(s.discriminator, x_real, x_fake, &grad);
  require_finite_update("discriminator_step", loss, grad);
  guarded_update("discriminator_step", s.discriminator, s.adam_d, grad, lr);
  return loss;
}

double discriminator_step(TrainState& s, const TrainingConfig&, const Tensor& x_real,
                          std::span<const double> z, std::span<const double> f, double lr) {
  const Tensor fake = nn::generator_forward(s.generator, x_real, z, f);
  return discriminator_update(s, x_real, fake, lr);
}

double generator_step(TrainState& s, const TrainingConfig&, const Tensor& x,
                      std::span<const double> z, std::span<const double> f, double lr,
                      const nn::GeneratorTrace* cached) {
  ParamSet grad;
  const double loss = generator_loss(s.generator, s.discriminator, x, z, f, &grad, cached);
  require_finite_update("generator_step", loss, grad);
  guarded_update("generator_step", s.generator, s.adam_g, grad, lr);
  return loss;
}

double poisoner_step(TrainState& s, const TrainingConfig& cfg, const Tensor& x0,
                     std::span<const double> z_p, double lr) {
  ParamSet grad;
  const PoisonLoss loss = poisoner_loss(s.poisoner, s.discriminator, x0, z_p,
                                        PoisonObjective::from(cfg), &grad);
  require_finite_update("poisoner_step", loss.total, grad);
  guarded_update("poisoner_step", s.poisoner, s.adam_p, grad, lr);
  return loss.total;
}

// -------------------------------------------------------------------- loop

namespace {

class RunWriter {
 public:
  RunWriter(const fs::path& dir, const TrainingConfig& cfg, std::span<const ImageTensor> data)
      : dir_(dir), cfg_(cfg) {
    if (dir_.empty()) return;
    std::error_code ec;
    fs::create_directories(dir_ / "checkpoints", ec);
    if (ec) throw IoError("cannot create run directory " + dir_.string() + ": " + ec.message());

    std::ofstream(dir_ / "config.json") << to_json(cfg).dump(2) << '\n';
    std::vector<double> flat;
    for (const auto& t : data) flat.insert(flat.end(), t.values().begin(), t.values().end());
    const auto side = static_cast<std::size_t>(cfg.image_side);
    io::write_npy(dir_ / "dataset.npy", {data.size(), 3, side, side}, flat);

    metrics_.open(dir_ / "metrics.csv");
    if (!metrics_) throw IoError("cannot write metrics.csv in " + dir_.string());
    metrics_ << "epoch,loss_d,loss_g,loss_p,lr,poisoned\n";
  }

  bool active() const { return !dir_.empty(); }

  void log_epoch(const EpochRecord& r) {
    if (!active()) return;
    char line[256];
    std::snprintf(line, sizeof(line), "%lld,%.17g,%.17g,%.17g,%.17g,%d\n",
                  static_cast<long long>(r.epoch), r.loss_d, r.loss_g, r.loss_p, r.lr_current,
                  r.poisoned_this_epoch ? 1 : 0);
    metrics_ << line << std::flush;
  }

  void log_sample(const SampleRecord& r) {
    if (!active()) return;
    sample_meta_.push_back(r);
    const auto v = r.sample->values();
    samples_.insert(samples_.end(), v.begin(), v.end());
  }

  fs::path checkpoint(const TrainState& s, bool final) {
    if (!active()) return {};
    char name[64];
    std::snprintf(name, sizeof(name), "epoch_%06lld.ckpt", static_cast<long long>(s.epoch));
    const fs::path path = final ? dir_ / "final.ckpt" : dir_ / "checkpoints" / name;
    ckpt::save_checkpoint(path, cfg_, s);
    flush_samples();
    return path;
  }

 private:
  void flush_samples() {
    const auto side = static_cast<std::size_t>(cfg_.image_side);
    io::write_npy(dir_ / "samples.npy", {sample_meta_.size(), 3, side, side}, samples_);
    std::ofstream meta(dir_ / "samples.csv");
    meta << "row,epoch,index,poisoned\n";
    for (std::size_t i = 0; i < sample_meta_.size(); ++i) {
      meta << i << ',' << sample_meta_[i].epoch << ',' << sample_meta_[i].index << ','
           << (sample_meta_[i].poisoned ? 1 : 0) << '\n';
    }
  }

  fs::path dir_;
  TrainingConfig cfg_;
  std::ofstream metrics_;
  std::vector<SampleRecord> sample_meta_;
  std::vector<double> samples_;
};

}  // namespace

TrainResult train(const TrainingConfig& cfg_in, std::span<const ImageTensor> dataset,
                  const TrainOptions& options) {
  TrainingConfig cfg = cfg_in;
  if (cfg.mode == Mode::kBaseline) cfg.poison_rate = 0.0;
  cfg.validate();
  if (dataset.empty()) throw InvalidConfigError("images", "dataset is empty");
  for (const auto& x : dataset) {
    require_image_tensor(x, "train dataset");
    if (x.height() != cfg.image_side || x.width() != cfg.image_side) {
      throw ShapeError("train dataset: image is " + x.shape_string() + ", config side is " +
                       std::to_string(cfg.image_side));
    }
  }

  TrainResult result;
  TrainState& s = result.state;
  s = init_state(cfg);
  RunWriter writer(options.run_dir, cfg, dataset);
  const bool poisoned_mode = cfg.mode == Mode::kPoisoned;
  const PoisonObjective objective = PoisonObjective::from(cfg);
  const Perturbation no_perturbation{Tensor(3, cfg.image_side, cfg.image_side), cfg.eps};

  for (std::int64_t e = 0; e < cfg.epochs; ++e) {
    const double lr = lr_at(e, cfg);
    EpochRecord rec;
    rec.epoch = e + 1;
    rec.lr_current = lr;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      const ImageTensor& x0 = dataset[i];
      // Every mode draws the same variates so baseline and poisoned runs with
      // one seed see identical z, f and z_p.
      const auto z = s.rng.normal_vector(nn::kLatentDim);
      const auto f = s.rng.bernoulli_vector(nn::kFeatureDim, 0.5);
      const auto z_p = s.rng.normal_vector(nn::kPoisonLatentDim);

      const Perturbation delta =
          poisoned_mode ? nn::poisoner_forward(s.poisoner, x0, z_p, cfg.eps) : no_perturbation;
      const poison::PoisonDecision decision =
          poison::maybe_poison(x0, delta, cfg.poison_rate, s.rng);
      const double u_poisoner = s.rng.uniform();

      const ImageTensor& x = decision.sample;
      const auto g_trace = nn::generator_trace(s.generator, x, z, f);
      const double loss_d = discriminator_update(s, x, g_trace.output, lr);
      const double loss_g = generator_step(s, cfg, x, z, f, lr, &g_trace);

      double loss_p = 0.0;
      if (poisoned_mode) {
        const bool update = cfg.poisoner_schedule == PoisonerSchedule::kEveryEpoch ||
                            u_poisoner < cfg.poison_rate;
        loss_p = update ? poisoner_step(s, cfg, x0, z_p, lr)
                        : poisoner_loss(s.poisoner, s.discriminator, x0, z_p, objective, nullptr)
                              .total;
        if (!std::isfinite(loss_p)) throw NonFiniteError("poisoner loss became non-finite");
      }

      const double n = static_cast<double>(dataset.size());
      rec.loss_d += loss_d / n;
      rec.loss_g += loss_g / n;
      rec.loss_p += loss_p / n;
      rec.poisoned_this_epoch = rec.poisoned_this_epoch || decision.poisoned;

      const SampleRecord sample{rec.epoch, static_cast<int>(i), decision.poisoned, &x0, &x};
      if (cfg.sample_log_every > 0 && e % cfg.sample_log_every == 0) writer.log_sample(sample);
      if (options.on_sample) options.on_sample(sample);
    }
    s.epoch = e + 1;
    s.history.push_back(rec);
    result.records.push_back(rec);
    writer.log_epoch(rec);
    if (options.on_epoch) options.on_epoch(rec);
    const bool last = s.epoch == cfg.epochs;
    if (cfg.checkpoint_every > 0 && s.epoch % cfg.checkpoint_every == 0) {
      writer.checkpoint(s, false);
    }
    if (last) result.final_checkpoint = writer.checkpoint(s, true);
  }
  return result;
}

std::vector<ImageTensor> load_dataset(const TrainingConfig& cfg, const fs::path& base_dir) {
  if (cfg.images.empty()) throw InvalidConfigError("images", "no training images configured");
  std::vector<ImageTensor> out;
  for (const auto& src : cfg.images) {
    constexpr std::string_view kSynthetic = "synthetic:";
    if (src.starts_with(kSynthetic)) {
      std::uint64_t seed = 0;
      try {
        seed = std::stoull(src.substr(kSynthetic.size()));
      } catch (const std::exception&) {
        throw InvalidConfigError("images", "bad synthetic image spec '" + src + "'");
      }
      out.push_back(image::to_gan_input(image::synthetic_scene(cfg.image_side, seed),
                                        cfg.image_side));
      continue;
    }
    fs::path path(src);
    if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
    out.push_back(image::to_gan_input(image::load_image(path), cfg.image_side));
  }
  return out;
}

}  // namespace vaguegan::train
