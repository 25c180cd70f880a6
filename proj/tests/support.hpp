#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "vaguegan/networks.hpp"
#include "vaguegan/tensor.hpp"

namespace vaguegan::testing {

inline Tensor random_tensor(int c, int h, int w, std::uint64_t seed, double lo = -1.0,
                            double hi = 1.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(c, h, w);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(gen);
  return t;
}

inline std::vector<double> random_vector(int n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(gen);
  return v;
}

inline std::vector<double> random_bits(int n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = static_cast<double>(gen() & 1U);
  return v;
}

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("vaguegan_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

struct GradCheckResult {
  int checked = 0;
  int passed = 0;
  double fraction() const { return checked > 0 ? static_cast<double>(passed) / checked : 0.0; }
};

// Compares analytic gradients of `loss` against central differences on
// `coords` parameter coordinates chosen uniformly at random.
inline GradCheckResult grad_check(nn::ParamSet params, const nn::ParamSet& analytic,
                                  const std::function<double(const nn::ParamSet&)>& loss,
                                  int coords, std::uint64_t seed, double step = 1e-5,
                                  double tol = 1e-3) {
  std::vector<std::pair<std::size_t, std::size_t>> index;
  for (std::size_t k = 0; k < params.params().size(); ++k) {
    for (std::size_t i = 0; i < params.params()[k].values.size(); ++i) index.emplace_back(k, i);
  }
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<std::size_t> pick(0, index.size() - 1);
  GradCheckResult r;
  for (int n = 0; n < coords; ++n) {
    const auto [k, i] = index[pick(gen)];
    double& w = params.params()[k].values[i];
    const double saved = w;
    w = saved + step;
    const double up = loss(params);
    w = saved - step;
    const double down = loss(params);
    w = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic.params()[k].values[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-7});
    ++r.checked;
    if (std::abs(a - numeric) / denom <= tol) ++r.passed;
  }
  return r;
}

}  // namespace vaguegan::testing
