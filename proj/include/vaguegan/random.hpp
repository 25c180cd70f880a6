#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace vaguegan {

// Caller-owned random stream. Wraps the engine together with the normal
// distribution so that the cached second Box-Muller variate is part of the
// serialized state; restoring from `state()` reproduces the exact sequence.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed = 0) : engine_(seed) {}

  double uniform() { return uniform_(engine_); }  // [0, 1)
  double normal() { return normal_(engine_); }
  bool bernoulli(double p) { return uniform() < p; }

  std::vector<double> normal_vector(int n);
  std::vector<double> bernoulli_vector(int n, double p);

  std::string state() const;
  void restore(const std::string& state);

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// Deterministic 64-bit seed mixing (splitmix64 finalizer); used to derive
// independent sub-streams from one user seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept;

}  // namespace vaguegan
