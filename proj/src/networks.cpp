#include "vaguegan/networks.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "vaguegan/errors.hpp"
#include "vaguegan/image.hpp"
#include "vaguegan/random.hpp"

namespace vaguegan::nn {

namespace {

struct ConvSpec {
  const char* name;
  int in;
  int out;
  int stride;
  Activation act;
};

constexpr ConvSpec kGeneratorConvs[] = {
    {"conv1", 5, 64, 1, Activation::kRelu},   {"conv2", 64, 64, 1, Activation::kRelu},
    {"conv3", 64, 128, 1, Activation::kRelu}, {"conv4", 128, 128, 1, Activation::kRelu},
    {"conv5", 128, 64, 1, Activation::kRelu}, {"conv6", 64, 32, 1, Activation::kRelu},
    {"conv_out", 32, 3, 1, Activation::kTanh},
};

// The classifier conv is applied separately because the GAP branch reads its input.
constexpr ConvSpec kDiscriminatorConvs[] = {
    {"conv1", 3, 32, 2, Activation::kLeakyRelu},
    {"conv2", 32, 64, 2, Activation::kLeakyRelu},
    {"conv3", 64, kDiscriminatorFeatureDim, 2, Activation::kLeakyRelu},
};
constexpr ConvSpec kClassifier = {"classifier", kDiscriminatorFeatureDim, 1, 1,
                                  Activation::kSigmoid};

constexpr ConvSpec kPoisonerConvs[] = {
    {"conv1", 4, 32, 1, Activation::kRelu},
    {"conv2", 32, 32, 1, Activation::kRelu},
    {"conv_out", 32, 3, 1, Activation::kTanh},
};

std::string weight_name(const ConvSpec& s) { return std::string(s.name) + ".weight"; }
std::string bias_name(const ConvSpec& s) { return std::string(s.name) + ".bias"; }

void add_conv(std::vector<ParamSpec>& specs, const ConvSpec& s) {
  const double gain = s.act == Activation::kRelu || s.act == Activation::kLeakyRelu
                          ? std::sqrt(2.0)
                          : 1.0;
  specs.push_back({weight_name(s), {s.out, s.in, 3, 3}, s.in * 9, false, gain});
  specs.push_back({bias_name(s), {s.out}, s.in * 9, true, 0.0});
}

void add_linear(std::vector<ParamSpec>& specs, const std::string& name, int in, int out) {
  specs.push_back({name + ".weight", {out, in}, in, false, 1.0});
  specs.push_back({name + ".bias", {out}, in, true, 0.0});
}

void require_side(int side) {
  if (side <= 0 || side % 8 != 0) {
    throw InvalidConfigError("image_side", "must be a positive multiple of 8, got " +
                                               std::to_string(side));
  }
}

void require_input(const ParamSet& p, NetworkId id, const Tensor& x, const char* what) {
  if (p.id() != id) {
    throw ShapeError(std::string(what) + ": parameter set belongs to " +
                     std::string(to_string(p.id())));
  }
  const int side = p.image_side();
  if (x.channels() != 3 || x.height() != side || x.width() != side) {
    throw ShapeError(std::string(what) + ": expected (3," + std::to_string(side) + "," +
                     std::to_string(side) + ") input, got " + x.shape_string());
  }
}

void require_length(std::span<const double> v, int n, const char* what) {
  if (v.size() != static_cast<std::size_t>(n)) {
    throw ShapeError(std::string(what) + ": expected length " + std::to_string(n) +
                     ", got " + std::to_string(v.size()));
  }
}

Tensor apply_conv(const ParamSet& p, const ConvSpec& s, const Tensor& in) {
  Tensor out =
      conv3x3_forward(in, p.values(weight_name(s)), p.values(bias_name(s)), s.out, s.stride);
  activate(out, s.act);
  return out;
}

// Runs the stack, recording each layer's input into `inputs`.
Tensor run_stack(const ParamSet& p, std::span<const ConvSpec> specs, Tensor in,
                 std::vector<Tensor>& inputs) {
  for (const auto& s : specs) {
    Tensor out = apply_conv(p, s, in);
    inputs.push_back(std::move(in));
    in = std::move(out);
  }
  return in;
}

// `grad` is dL/d(activated output of the last layer). Returns dL/d(stack input)
// when `want_input_grad`.
Tensor backprop_stack(const ParamSet& p, std::span<const ConvSpec> specs,
                      std::span<const Tensor> inputs, const Tensor& output, Tensor grad,
                      ParamSet* grads, bool want_input_grad) {
  for (int i = static_cast<int>(specs.size()) - 1; i >= 0; --i) {
    const ConvSpec& s = specs[i];
    const Tensor& activated = (i + 1 < static_cast<int>(specs.size())) ? inputs[i + 1] : output;
    activation_backward(activated, s.act, grad);
    std::span<double> gw, gb;
    if (grads != nullptr) {
      gw = grads->get(weight_name(s)).values;
      gb = grads->get(bias_name(s)).values;
    }
    const bool need_in = i > 0 || want_input_grad;
    Tensor grad_in;
    conv3x3_backward(inputs[i], p.values(weight_name(s)), s.out, s.stride, grad, gw, gb,
                     need_in ? &grad_in : nullptr);
    grad = std::move(grad_in);
  }
  return grad;
}

}  // namespace

std::string_view to_string(NetworkId id) {
  switch (id) {
    case NetworkId::kGenerator:
      return "generator";
    case NetworkId::kDiscriminator:
      return "discriminator";
    case NetworkId::kPoisoner:
      return "poisoner";
  }
  return "unknown";
}

NetworkId network_from_string(std::string_view name) {
  if (name == "generator") return NetworkId::kGenerator;
  if (name == "discriminator") return NetworkId::kDiscriminator;
  if (name == "poisoner") return NetworkId::kPoisoner;
  throw InvalidConfigError("network", "unknown network id '" + std::string(name) + "'");
}

const Param& ParamSet::get(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p;
  }
  throw ShapeError("no parameter named '" + std::string(name) + "' in " +
                   std::string(to_string(id_)));
}

Param& ParamSet::get(std::string_view name) {
  return const_cast<Param&>(std::as_const(*this).get(name));
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out = *this;
  for (auto& p : out.params_) std::fill(p.values.begin(), p.values.end(), 0.0);
  return out;
}

std::size_t ParamSet::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.values.size();
  return n;
}

bool ParamSet::all_finite() const noexcept {
  for (const auto& p : params_) {
    if (!vaguegan::all_finite(p.values)) return false;
  }
  return true;
}

std::vector<ParamSpec> architecture(NetworkId id, int side) {
  require_side(side);
  std::vector<ParamSpec> specs;
  switch (id) {
    case NetworkId::kGenerator:
      add_linear(specs, "proj_z", kLatentDim, side * side);
      add_linear(specs, "proj_f", kFeatureDim, side * side);
      for (const auto& s : kGeneratorConvs) add_conv(specs, s);
      break;
    case NetworkId::kDiscriminator:
      for (const auto& s : kDiscriminatorConvs) add_conv(specs, s);
      add_conv(specs, kClassifier);
      break;
    case NetworkId::kPoisoner:
      add_linear(specs, "proj", kPoisonLatentDim, kPoisonSeedSide * kPoisonSeedSide);
      for (const auto& s : kPoisonerConvs) add_conv(specs, s);
      break;
  }
  return specs;
}

ParamSet zero_params(NetworkId id, int side) {
  std::vector<Param> params;
  for (const auto& spec : architecture(id, side)) {
    std::size_t n = 1;
    for (int d : spec.shape) n *= static_cast<std::size_t>(d);
    params.push_back({spec.name, spec.shape, std::vector<double>(n, 0.0)});
  }
  return ParamSet(id, side, std::move(params));
}

ParamSet init_params(NetworkId id, std::uint64_t seed, int side) {
  ParamSet p = zero_params(id, side);
  std::mt19937_64 engine(mix_seed(seed, static_cast<std::uint64_t>(id) + 101));
  const auto specs = architecture(id, side);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (specs[i].is_bias) continue;
    std::normal_distribution<double> dist(0.0, specs[i].gain / std::sqrt(specs[i].fan_in));
    for (double& v : p.params()[i].values) v = dist(engine);
  }
  return p;
}

void validate_params(const ParamSet& p) {
  const auto specs = architecture(p.id(), p.image_side());
  if (specs.size() != p.params().size()) {
    throw ShapeError(std::string(to_string(p.id())) + ": wrong number of tensors");
  }
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const Param& actual = p.params()[i];
    std::size_t n = 1;
    for (int d : specs[i].shape) n *= static_cast<std::size_t>(d);
    if (actual.name != specs[i].name || actual.shape != specs[i].shape ||
        actual.values.size() != n) {
      throw ShapeError(std::string(to_string(p.id())) + ": tensor '" + actual.name +
                       "' does not match the architecture");
    }
  }
  if (!p.all_finite()) {
    throw NonFiniteError(std::string(to_string(p.id())) + ": non-finite parameter");
  }
}

// ---------------------------------------------------------------- generator

GeneratorTrace generator_trace(const ParamSet& p, const Tensor& x,
                               std::span<const double> z, std::span<const double> f) {
  require_input(p, NetworkId::kGenerator, x, "generator_forward");
  require_length(z, kLatentDim, "generator_forward latent");
  require_length(f, kFeatureDim, "generator_forward features");
  const int side = p.image_side();

  Tensor stack(5, side, side);
  std::copy(x.values().begin(), x.values().end(), stack.values().begin());
  linear_forward(z, p.values("proj_z.weight"), p.values("proj_z.bias"), stack.channel(3));
  linear_forward(f, p.values("proj_f.weight"), p.values("proj_f.bias"), stack.channel(4));

  GeneratorTrace trace;
  trace.latent.assign(z.begin(), z.end());
  trace.features.assign(f.begin(), f.end());
  trace.layer_inputs.reserve(std::size(kGeneratorConvs));
  trace.output = run_stack(p, kGeneratorConvs, std::move(stack), trace.layer_inputs);
  return trace;
}

Tensor generator_forward(const ParamSet& p, const Tensor& x, std::span<const double> z,
                         std::span<const double> f) {
  return generator_trace(p, x, z, f).output;
}

void generator_backward(const ParamSet& p, const GeneratorTrace& trace,
                        const Tensor& grad_output, ParamSet& grad) {
  require_same_shape(trace.output, grad_output, "generator_backward");
  const Tensor grad_stack = backprop_stack(p, kGeneratorConvs, trace.layer_inputs,
                                           trace.output, grad_output, &grad, true);
  linear_backward(trace.latent, grad_stack.channel(3), grad.get("proj_z.weight").values,
                  grad.get("proj_z.bias").values);
  linear_backward(trace.features, grad_stack.channel(4), grad.get("proj_f.weight").values,
                  grad.get("proj_f.bias").values);
}

// ------------------------------------------------------------ discriminator

DiscriminatorTrace discriminator_trace(const ParamSet& p, const Tensor& x) {
  require_input(p, NetworkId::kDiscriminator, x, "discriminator_forward");
  DiscriminatorTrace trace;
  Tensor h = run_stack(p, kDiscriminatorConvs, x, trace.layer_inputs);

  auto& out = trace.out;
  out.features.resize(h.channels());
  for (int c = 0; c < h.channels(); ++c) {
    double s = 0.0;
    for (double v : h.channel(c)) s += v;
    out.features[c] = s / static_cast<double>(h.plane());
  }
  out.prob_map = apply_conv(p, kClassifier, h);
  double s = 0.0;
  for (double v : out.prob_map.values()) s += v;
  out.prob = s / static_cast<double>(out.prob_map.size());
  trace.layer_inputs.push_back(std::move(h));
  return trace;
}

DiscriminatorOutput discriminator_forward(const ParamSet& p, const Tensor& x) {
  return discriminator_trace(p, x).out;
}

void discriminator_backward(const ParamSet& p, const DiscriminatorTrace& trace,
                            double grad_prob, ParamSet* grad, Tensor* grad_input) {
  const Tensor& prob_map = trace.out.prob_map;
  Tensor grad_map(prob_map.channels(), prob_map.height(), prob_map.width(),
                  grad_prob / static_cast<double>(prob_map.size()));
  const ConvSpec classifier[] = {kClassifier};
  const std::span<const Tensor> inputs(trace.layer_inputs);
  Tensor grad_h = backprop_stack(p, classifier, inputs.subspan(3, 1), prob_map,
                                 std::move(grad_map), grad, true);
  Tensor grad_x = backprop_stack(p, kDiscriminatorConvs, inputs.first(3), inputs[3],
                                 std::move(grad_h), grad, grad_input != nullptr);
  if (grad_input != nullptr) *grad_input = std::move(grad_x);
}

// ----------------------------------------------------------------- poisoner

PoisonerTrace poisoner_trace(const ParamSet& p, const Tensor& x,
                             std::span<const double> z_p, double eps) {
  if (!(eps >= 0.0)) throw InvalidConfigError("eps", "must be non-negative");
  require_input(p, NetworkId::kPoisoner, x, "poisoner_forward");
  require_length(z_p, kPoisonLatentDim, "poisoner_forward latent");
  const int side = p.image_side();

  Tensor seed_map(1, kPoisonSeedSide, kPoisonSeedSide);
  linear_forward(z_p, p.values("proj.weight"), p.values("proj.bias"), seed_map.values());
  const Tensor upsampled = image::resize_bilinear(seed_map, side, side);

  Tensor stack(4, side, side);
  std::copy(x.values().begin(), x.values().end(), stack.values().begin());
  std::copy(upsampled.values().begin(), upsampled.values().end(), stack.channel(3).begin());

  PoisonerTrace trace;
  trace.latent.assign(z_p.begin(), z_p.end());
  trace.raw = run_stack(p, kPoisonerConvs, std::move(stack), trace.layer_inputs);
  trace.delta.eps = eps;
  trace.delta.values = trace.raw;
  for (double& v : trace.delta.values.values()) v = std::clamp(v * eps, -eps, eps);
  return trace;
}

Perturbation poisoner_forward(const ParamSet& p, const Tensor& x,
                              std::span<const double> z_p, double eps) {
  return poisoner_trace(p, x, z_p, eps).delta;
}

void poisoner_backward(const ParamSet& p, const PoisonerTrace& trace,
                       const Tensor& grad_delta, ParamSet& grad) {
  require_same_shape(trace.raw, grad_delta, "poisoner_backward");
  // The clip after scaling by eps is inactive because |tanh| <= 1.
  Tensor grad_raw = grad_delta;
  for (double& v : grad_raw.values()) v *= trace.delta.eps;
  const Tensor grad_stack = backprop_stack(p, kPoisonerConvs, trace.layer_inputs, trace.raw,
                                           std::move(grad_raw), &grad, true);

  Tensor grad_up(1, grad_stack.height(), grad_stack.width());
  std::copy(grad_stack.channel(3).begin(), grad_stack.channel(3).end(),
            grad_up.values().begin());
  const Tensor grad_seed =
      image::resize_bilinear_adjoint(grad_up, kPoisonSeedSide, kPoisonSeedSide);
  linear_backward(trace.latent, grad_seed.values(), grad.get("proj.weight").values,
                  grad.get("proj.bias").values);
}

}  // namespace vaguegan::nn
