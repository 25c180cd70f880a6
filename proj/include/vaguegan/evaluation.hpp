#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "json.hpp"
#include "vaguegan/networks.hpp"
#include "vaguegan/poisoning.hpp"

namespace vaguegan::eval {

// N x d row-major feature matrix with per-row ground truth (true = poisoned).
struct FeatureMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;
  std::vector<bool> labels;

  std::span<const double> row(int i) const {
    return std::span<const double>(values).subspan(static_cast<std::size_t>(i) * cols, cols);
  }
};

// Throws ShapeError unless rows >= 2, labels match and all values finite.
void validate(const FeatureMatrix& fm);

struct LabeledSample {
  ImageTensor image;
  bool poisoned = false;
};

// Row i is the discriminator's pooled penultimate features for samples[i].
FeatureMatrix collect_features(const nn::ParamSet& d, std::span<const LabeledSample> samples);

// s_i = |<F_c[i], v1>| with F_c the mean-centred rows and v1 the top right
// singular vector. A zero-variance matrix yields all-zero scores.
std::vector<double> spectral_scores(const FeatureMatrix& fm);

struct OutlierFlags {
  std::vector<bool> flagged;
  double threshold = 0.0;
};

// Threshold = linearly interpolated empirical percentile; flagged iff the
// score is strictly above it. percentile must lie in (0, 100).
OutlierFlags flag_outliers(std::span<const double> scores, double percentile = 90.0);

struct DetectionMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

DetectionMetrics detection_metrics(const std::vector<bool>& flags, const std::vector<bool>& truth);
// Harmonic mean with the 0 convention when precision + recall = 0.
double f1_score(double precision, double recall);

struct SpectralReport {
  std::vector<double> scores;
  double threshold = 0.0;
  std::vector<bool> flagged;
  std::vector<bool> truth;
  double percentile = 90.0;
  DetectionMetrics metrics;
};

SpectralReport spectral_signature(const FeatureMatrix& fm, double percentile = 90.0);

struct BackdoorProxyReport {
  double delta_i = 0.0;
  std::vector<double> per_sample;
  int n_samples = 0;
  poison::TriggerConfig trigger;
};

using GeneratorFn = std::function<Tensor(const Tensor& x, std::span<const double> z,
                                         std::span<const double> f)>;

// For n_samples (z, f) draws derived from `seed`, each shared between the two
// calls: mean over the patch region and all channels of
// G(inject_trigger(x), z, f) - G(x, z, f). delta_i is the mean over draws.
BackdoorProxyReport backdoor_proxy(const GeneratorFn& generator, const ImageTensor& x,
                                   const poison::TriggerConfig& trigger, int n_samples,
                                   std::uint64_t seed);
BackdoorProxyReport backdoor_proxy(const nn::ParamSet& g, const ImageTensor& x,
                                   const poison::TriggerConfig& trigger, int n_samples,
                                   std::uint64_t seed);

struct FrequencyReport {
  // Mean |(|X'| - |X|)| per radial band of the centred spectrum, averaged over channels.
  std::vector<double> radial_bands;
  // sum |X' - X|^2 / (H W) over channels; equals sum (x' - x)^2 by Parseval.
  double total_spectral_energy_diff = 0.0;
  // sum (|X'| - |X|)^2 / (H W) over channels; a lower bound of the above.
  double magnitude_energy_diff = 0.0;
};

FrequencyReport frequency_report(const ImageTensor& x, const ImageTensor& xp, int bands = 8);

// Radial band (0-based) of DFT bin (ky, kx) on an H x W grid.
int radial_band(int ky, int kx, int height, int width, int bands);

nlohmann::json to_json(const SpectralReport& r);
nlohmann::json to_json(const BackdoorProxyReport& r);
nlohmann::json to_json(const FrequencyReport& r);

}  // namespace vaguegan::eval
