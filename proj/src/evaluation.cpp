#include "vaguegan/evaluation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <unsupported/Eigen/FFT>

#include "vaguegan/errors.hpp"
#include "vaguegan/random.hpp"

namespace vaguegan::eval {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void validate(const FeatureMatrix& fm) {
  if (fm.rows < 2) throw ShapeError("feature matrix needs at least 2 rows");
  if (fm.cols < 1) throw ShapeError("feature matrix needs at least 1 column");
  if (fm.values.size() != static_cast<std::size_t>(fm.rows) * fm.cols) {
    throw ShapeError("feature matrix values do not match rows x cols");
  }
  if (fm.labels.size() != static_cast<std::size_t>(fm.rows)) {
    throw ShapeError("feature matrix labels do not match row count");
  }
  if (!all_finite(fm.values)) throw InvalidTensorError("feature matrix has non-finite entries");
}

FeatureMatrix collect_features(const nn::ParamSet& d, std::span<const LabeledSample> samples) {
  if (samples.size() < 2) throw ShapeError("collect_features needs at least 2 samples");
  FeatureMatrix fm;
  fm.rows = static_cast<int>(samples.size());
  for (const auto& s : samples) {
    const auto out = nn::discriminator_forward(d, s.image);
    fm.cols = static_cast<int>(out.features.size());
    fm.values.insert(fm.values.end(), out.features.begin(), out.features.end());
    fm.labels.push_back(s.poisoned);
  }
  return fm;
}

std::vector<double> spectral_scores(const FeatureMatrix& fm) {
  validate(fm);
  const Eigen::Map<const RowMatrix> f(fm.values.data(), fm.rows, fm.cols);
  const RowMatrix centred = f.rowwise() - f.colwise().mean();
  std::vector<double> scores(fm.rows, 0.0);
  const double scale = 1.0 + f.cwiseAbs().maxCoeff();
  if (centred.cwiseAbs().maxCoeff() <= 1e-12 * scale) return scores;

  Eigen::JacobiSVD<RowMatrix> svd(centred, Eigen::ComputeThinV);
  const Eigen::VectorXd top = svd.matrixV().col(0);
  const Eigen::VectorXd proj = centred * top;
  for (int i = 0; i < fm.rows; ++i) scores[i] = std::abs(proj[i]);
  return scores;
}

OutlierFlags flag_outliers(std::span<const double> scores, double percentile) {
  if (scores.empty()) throw ShapeError("flag_outliers: no scores");
  if (!(percentile > 0.0 && percentile < 100.0)) {
    throw InvalidConfigError("percentile", "must lie strictly between 0 and 100");
  }
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = percentile / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);

  OutlierFlags out;
  out.threshold = sorted[lo] + frac * (sorted[hi] - sorted[lo]);
  out.flagged.reserve(scores.size());
  for (double s : scores) out.flagged.push_back(s > out.threshold);
  return out;
}

double f1_score(double precision, double recall) {
  const double sum = precision + recall;
  return sum > 0.0 ? 2.0 * precision * recall / sum : 0.0;
}

DetectionMetrics detection_metrics(const std::vector<bool>& flags, const std::vector<bool>& truth) {
  if (flags.size() != truth.size()) {
    throw ShapeError("detection_metrics: flags and truth differ in length");
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (flags[i] && truth[i]) ++tp;
    if (flags[i] && !truth[i]) ++fp;
    if (!flags[i] && truth[i]) ++fn;
  }
  DetectionMetrics m;
  m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = f1_score(m.precision, m.recall);
  return m;
}

SpectralReport spectral_signature(const FeatureMatrix& fm, double percentile) {
  SpectralReport r;
  r.scores = spectral_scores(fm);
  auto flags = flag_outliers(r.scores, percentile);
  r.flagged = std::move(flags.flagged);
  r.threshold = flags.threshold;
  r.truth = fm.labels;
  r.percentile = percentile;
  r.metrics = detection_metrics(r.flagged, r.truth);
  return r;
}

BackdoorProxyReport backdoor_proxy(const GeneratorFn& generator, const ImageTensor& x,
                                   const poison::TriggerConfig& trigger, int n_samples,
                                   std::uint64_t seed) {
  if (n_samples < 1) throw InvalidConfigError("n_samples", "must be >= 1");
  const ImageTensor triggered = poison::inject_trigger(x, trigger);
  RandomStream rng(mix_seed(seed, 0xbd));

  BackdoorProxyReport r;
  r.n_samples = n_samples;
  r.trigger = trigger;
  const int h = x.height(), w = x.width(), k = trigger.patch_side;
  for (int n = 0; n < n_samples; ++n) {
    const auto z = rng.normal_vector(nn::kLatentDim);
    const auto f = rng.bernoulli_vector(nn::kFeatureDim, 0.5);
    const Tensor clean = generator(x, z, f);
    const Tensor trig = generator(triggered, z, f);
    require_same_shape(clean, trig, "backdoor_proxy");
    double s = 0.0;
    for (int c = 0; c < clean.channels(); ++c) {
      for (int y = h - k; y < h; ++y) {
        for (int xx = w - k; xx < w; ++xx) s += trig(c, y, xx) - clean(c, y, xx);
      }
    }
    const double count = static_cast<double>(clean.channels()) * k * k;
    r.per_sample.push_back(count > 0 ? s / count : 0.0);
  }
  double total = 0.0;
  for (double v : r.per_sample) total += v;
  r.delta_i = total / n_samples;
  return r;
}

BackdoorProxyReport backdoor_proxy(const nn::ParamSet& g, const ImageTensor& x,
                                   const poison::TriggerConfig& trigger, int n_samples,
                                   std::uint64_t seed) {
  return backdoor_proxy(
      [&g](const Tensor& in, std::span<const double> z, std::span<const double> f) {
        return nn::generator_forward(g, in, z, f);
      },
      x, trigger, n_samples, seed);
}

namespace {

using Spectrum = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Spectrum dft2(std::span<const double> plane, int h, int w) {
  Eigen::FFT<double> fft;
  Spectrum rows(h, w);
  std::vector<double> in_row(w);
  std::vector<std::complex<double>> out_row;
  for (int y = 0; y < h; ++y) {
    std::copy_n(plane.begin() + static_cast<std::ptrdiff_t>(y) * w, w, in_row.begin());
    fft.fwd(out_row, in_row);
    for (int x = 0; x < w; ++x) rows(y, x) = out_row[x];
  }
  std::vector<std::complex<double>> col(h), out_col;
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) col[y] = rows(y, x);
    fft.fwd(out_col, col);
    for (int y = 0; y < h; ++y) rows(y, x) = out_col[y];
  }
  return rows;
}

int signed_frequency(int k, int n) { return k <= n / 2 ? k : k - n; }

}  // namespace

int radial_band(int ky, int kx, int height, int width, int bands) {
  const double fy = signed_frequency(ky, height);
  const double fx = signed_frequency(kx, width);
  const double r_max = std::hypot(height / 2.0, width / 2.0);
  const int b = static_cast<int>(std::floor(std::hypot(fy, fx) / r_max * bands));
  return std::clamp(b, 0, bands - 1);
}

FrequencyReport frequency_report(const ImageTensor& x, const ImageTensor& xp, int bands) {
  require_same_shape(x, xp, "frequency_report");
  if (bands < 1) throw InvalidConfigError("bands", "must be >= 1");
  const int h = x.height(), w = x.width();
  FrequencyReport r;
  r.radial_bands.assign(bands, 0.0);
  std::vector<double> counts(bands, 0.0);
  const double n = static_cast<double>(h) * w;
  for (int c = 0; c < x.channels(); ++c) {
    const Spectrum a = dft2(x.channel(c), h, w);
    const Spectrum b = dft2(xp.channel(c), h, w);
    for (int ky = 0; ky < h; ++ky) {
      for (int kx = 0; kx < w; ++kx) {
        const double mag_diff = std::abs(b(ky, kx)) - std::abs(a(ky, kx));
        const int band = radial_band(ky, kx, h, w, bands);
        r.radial_bands[band] += std::abs(mag_diff);
        counts[band] += 1.0;
        r.total_spectral_energy_diff += std::norm(b(ky, kx) - a(ky, kx)) / n;
        r.magnitude_energy_diff += mag_diff * mag_diff / n;
      }
    }
  }
  for (int b = 0; b < bands; ++b) {
    if (counts[b] > 0) r.radial_bands[b] /= counts[b];
  }
  return r;
}

nlohmann::json to_json(const SpectralReport& r) {
  return {
      {"scores", r.scores},
      {"threshold", r.threshold},
      {"percentile", r.percentile},
      {"flagged", r.flagged},
      {"truth", r.truth},
      {"n_samples", r.scores.size()},
      {"n_poisoned", std::count(r.truth.begin(), r.truth.end(), true)},
      {"precision", r.metrics.precision},
      {"recall", r.metrics.recall},
      {"f1", r.metrics.f1},
  };
}

nlohmann::json to_json(const BackdoorProxyReport& r) {
  return {
      {"delta_i", r.delta_i},
      {"per_sample", r.per_sample},
      {"n_samples", r.n_samples},
      {"trigger", {{"patch_side", r.trigger.patch_side}, {"value", r.trigger.value}}},
  };
}

nlohmann::json to_json(const FrequencyReport& r) {
  return {
      {"radial_bands", r.radial_bands},
      {"total_spectral_energy_diff", r.total_spectral_energy_diff},
      {"magnitude_energy_diff", r.magnitude_energy_diff},
  };
}

}  // namespace vaguegan::eval
