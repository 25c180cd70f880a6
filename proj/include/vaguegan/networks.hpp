#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vaguegan/layers.hpp"
#include "vaguegan/tensor.hpp"

namespace vaguegan::nn {

inline constexpr int kLatentDim = 128;
inline constexpr int kFeatureDim = 10;
inline constexpr int kPoisonLatentDim = 32;
inline constexpr int kPoisonSeedSide = 16;
inline constexpr int kDiscriminatorFeatureDim = 128;

enum class NetworkId { kGenerator, kDiscriminator, kPoisoner };

std::string_view to_string(NetworkId id);
NetworkId network_from_string(std::string_view name);

struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<double> values;

  bool operator==(const Param&) const = default;
};

// Named tensors of one network, tagged with the network and the image side the
// shapes were derived from.
class ParamSet {
 public:
  ParamSet() = default;
  ParamSet(NetworkId id, int image_side, std::vector<Param> params)
      : id_(id), image_side_(image_side), params_(std::move(params)) {}

  NetworkId id() const noexcept { return id_; }
  int image_side() const noexcept { return image_side_; }

  std::span<Param> params() noexcept { return params_; }
  std::span<const Param> params() const noexcept { return params_; }

  const Param& get(std::string_view name) const;
  Param& get(std::string_view name);
  std::span<const double> values(std::string_view name) const { return get(name).values; }

  ParamSet zeros_like() const;
  std::size_t scalar_count() const noexcept;
  bool all_finite() const noexcept;

  bool operator==(const ParamSet&) const = default;

 private:
  NetworkId id_ = NetworkId::kGenerator;
  int image_side_ = 0;
  std::vector<Param> params_;
};

struct ParamSpec {
  std::string name;
  std::vector<int> shape;
  int fan_in = 0;
  bool is_bias = false;
  double gain = 1.0;  // init std = gain / sqrt(fan_in)
};

// Architecture registry: the exact parameter list for a network at a side.
std::vector<ParamSpec> architecture(NetworkId id, int image_side);

// Zero-mean normal weights with std gain/sqrt(fan_in), zero biases.
ParamSet init_params(NetworkId id, std::uint64_t seed, int image_side = 128);
ParamSet zero_params(NetworkId id, int image_side = 128);

// Throws ShapeError/NonFiniteError unless `p` matches the registry.
void validate_params(const ParamSet& p);

// ---------------------------------------------------------------- generator

struct GeneratorTrace {
  std::vector<double> latent;
  std::vector<double> features;
  std::vector<Tensor> layer_inputs;  // input of every conv, [0] is the 5-channel stack
  Tensor output;
};

GeneratorTrace generator_trace(const ParamSet& p, const Tensor& x,
                               std::span<const double> z, std::span<const double> f);
Tensor generator_forward(const ParamSet& p, const Tensor& x, std::span<const double> z,
                         std::span<const double> f);

// Accumulates dL/dparams given dL/d(output).
void generator_backward(const ParamSet& p, const GeneratorTrace& trace,
                        const Tensor& grad_output, ParamSet& grad);

// ------------------------------------------------------------ discriminator

struct DiscriminatorOutput {
  Tensor prob_map;              // 1 x side/8 x side/8
  double prob = 0.0;            // mean of prob_map
  std::vector<double> features; // global average pool of the penultimate map
};

struct DiscriminatorTrace {
  std::vector<Tensor> layer_inputs;  // input of conv1..conv3 and of the classifier
  DiscriminatorOutput out;
};

DiscriminatorTrace discriminator_trace(const ParamSet& p, const Tensor& x);
DiscriminatorOutput discriminator_forward(const ParamSet& p, const Tensor& x);

// Backpropagates dL/dprob. Parameter gradients are accumulated into `grad`
// when non-null; the input gradient is written to `grad_input` when non-null.
void discriminator_backward(const ParamSet& p, const DiscriminatorTrace& trace,
                            double grad_prob, ParamSet* grad, Tensor* grad_input);

// ----------------------------------------------------------------- poisoner

struct PoisonerTrace {
  std::vector<double> latent;
  std::vector<Tensor> layer_inputs;  // [0] is the 4-channel stack
  Tensor raw;                        // tanh output in [-1, 1]
  Perturbation delta;
};

PoisonerTrace poisoner_trace(const ParamSet& p, const Tensor& x,
                             std::span<const double> z_p, double eps);
Perturbation poisoner_forward(const ParamSet& p, const Tensor& x,
                              std::span<const double> z_p, double eps);

// Accumulates dL/dparams given dL/d(delta).
void poisoner_backward(const ParamSet& p, const PoisonerTrace& trace,
                       const Tensor& grad_delta, ParamSet& grad);

}  // namespace vaguegan::nn
