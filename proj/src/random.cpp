#include "vaguegan/random.hpp"

#include <sstream>

#include "vaguegan/errors.hpp"

namespace vaguegan {

std::vector<double> RandomStream::normal_vector(int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  for (auto& v : out) v = normal();
  return out;
}

std::vector<double> RandomStream::bernoulli_vector(int n, double p) {
  std::vector<double> out(static_cast<std::size_t>(n));
  for (auto& v : out) v = bernoulli(p) ? 1.0 : 0.0;
  return out;
}

std::string RandomStream::state() const {
  std::ostringstream os;
  os << engine_ << '\n' << uniform_ << '\n' << normal_;
  return os.str();
}

void RandomStream::restore(const std::string& state) {
  std::istringstream is(state);
  is >> engine_ >> uniform_ >> normal_;
  if (!is) throw CheckpointError("unreadable random stream state");
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace vaguegan
