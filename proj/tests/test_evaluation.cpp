#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <numbers>

#include "support.hpp"
#include "vaguegan/errors.hpp"
#include "vaguegan/evaluation.hpp"

using namespace vaguegan;
using namespace vaguegan::eval;

namespace {

FeatureMatrix gaussian_matrix(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist;
  FeatureMatrix fm;
  fm.rows = rows;
  fm.cols = cols;
  for (int i = 0; i < rows * cols; ++i) fm.values.push_back(dist(gen));
  fm.labels.assign(rows, false);
  return fm;
}

// |<row_i - mean, v>| with v from power iteration on Fc^T Fc.
std::vector<double> power_iteration_scores(const FeatureMatrix& fm, int iterations = 500) {
  std::vector<double> mean(fm.cols, 0.0);
  for (int i = 0; i < fm.rows; ++i) {
    for (int j = 0; j < fm.cols; ++j) mean[j] += fm.values[i * fm.cols + j] / fm.rows;
  }
  std::vector<double> c(fm.values.size());
  for (int i = 0; i < fm.rows; ++i) {
    for (int j = 0; j < fm.cols; ++j) c[i * fm.cols + j] = fm.values[i * fm.cols + j] - mean[j];
  }
  std::vector<double> v(fm.cols, 1.0), u(fm.rows), next(fm.cols);
  for (int it = 0; it < iterations; ++it) {
    for (int i = 0; i < fm.rows; ++i) {
      u[i] = 0.0;
      for (int j = 0; j < fm.cols; ++j) u[i] += c[i * fm.cols + j] * v[j];
    }
    std::fill(next.begin(), next.end(), 0.0);
    for (int i = 0; i < fm.rows; ++i) {
      for (int j = 0; j < fm.cols; ++j) next[j] += c[i * fm.cols + j] * u[i];
    }
    double norm = 0.0;
    for (double x : next) norm += x * x;
    norm = std::sqrt(norm);
    for (int j = 0; j < fm.cols; ++j) v[j] = next[j] / norm;
  }
  std::vector<double> scores(fm.rows);
  for (int i = 0; i < fm.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < fm.cols; ++j) s += c[i * fm.cols + j] * v[j];
    scores[i] = std::abs(s);
  }
  return scores;
}

FeatureMatrix planted_shift(int rows, int cols, double shift, std::uint64_t seed) {
  FeatureMatrix fm = gaussian_matrix(rows, cols, seed);
  for (int i = 0; i < rows / 10; ++i) {
    fm.values[static_cast<std::size_t>(i) * cols] += shift;
    fm.labels[i] = true;
  }
  return fm;
}

}  // namespace

TEST(SpectralScores, HandExample) {
  FeatureMatrix fm{2, 2, {1, 0, -1, 0}, {false, false}};
  const auto s = spectral_scores(fm);
  EXPECT_NEAR(s[0], 1.0, 1e-12);
  EXPECT_NEAR(s[1], 1.0, 1e-12);
}

TEST(SpectralScores, MatchesPowerIteration) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const FeatureMatrix fm = gaussian_matrix(20, 8, seed);
    const auto got = spectral_scores(fm);
    const auto want = power_iteration_scores(fm);
    for (int i = 0; i < 20; ++i) EXPECT_NEAR(got[i], want[i], 1e-5);
  }
}

TEST(SpectralScores, CentringAndRotationInvariance) {
  const FeatureMatrix fm = gaussian_matrix(15, 4, 3);
  const auto base = spectral_scores(fm);

  FeatureMatrix shifted = fm;
  for (int i = 0; i < fm.rows; ++i) {
    for (int j = 0; j < fm.cols; ++j) shifted.values[i * fm.cols + j] += 3.0 * (j + 1);
  }
  const auto s1 = spectral_scores(shifted);

  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(
                                Eigen::MatrixXd::Random(fm.cols, fm.cols))
                                .householderQ();
  FeatureMatrix rotated = fm;
  for (int i = 0; i < fm.rows; ++i) {
    for (int j = 0; j < fm.cols; ++j) {
      double s = 0.0;
      for (int k = 0; k < fm.cols; ++k) s += fm.values[i * fm.cols + k] * q(k, j);
      rotated.values[i * fm.cols + j] = s;
    }
  }
  const auto s2 = spectral_scores(rotated);
  for (int i = 0; i < fm.rows; ++i) {
    EXPECT_NEAR(s1[i], base[i], 1e-9);
    EXPECT_NEAR(s2[i], base[i], 1e-6);
  }
}

TEST(SpectralScores, DegenerateInputs) {
  FeatureMatrix same{3, 2, {1, 2, 1, 2, 1, 2}, {false, false, true}};
  for (double s : spectral_scores(same)) EXPECT_EQ(s, 0.0);
  FeatureMatrix one{1, 2, {1, 2}, {false}};
  EXPECT_THROW(spectral_scores(one), ShapeError);
  FeatureMatrix bad{2, 1, {1, std::nan("")}, {false, false}};
  EXPECT_THROW(spectral_scores(bad), InvalidTensorError);
}

TEST(SpectralScores, PlantedShiftDetected) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto report = spectral_signature(planted_shift(200, 16, 10.0, seed), 90.0);
    EXPECT_GE(report.metrics.precision, 0.9) << "seed " << seed;
    EXPECT_GE(report.metrics.recall, 0.9) << "seed " << seed;
  }
}

TEST(FlagOutliers, Conventions) {
  std::vector<double> scores(100);
  for (int i = 0; i < 100; ++i) scores[i] = i;
  const auto f = flag_outliers(scores, 90);
  EXPECT_EQ(std::count(f.flagged.begin(), f.flagged.end(), true), 10);
  EXPECT_DOUBLE_EQ(f.threshold, 89.1);

  const std::vector<double> equal(10, 2.0);
  const auto g = flag_outliers(equal, 90);
  EXPECT_EQ(std::count(g.flagged.begin(), g.flagged.end(), true), 0);

  EXPECT_THROW(flag_outliers(scores, 0.0), InvalidConfigError);
  EXPECT_THROW(flag_outliers(scores, 100.0), InvalidConfigError);
  EXPECT_THROW(flag_outliers(std::vector<double>{}, 90), ShapeError);
}

TEST(DetectionMetrics, Conventions) {
  const std::vector<bool> truth{true, false, true, false};
  const auto perfect = detection_metrics(truth, truth);
  EXPECT_EQ(perfect.precision, 1.0);
  EXPECT_EQ(perfect.recall, 1.0);
  EXPECT_EQ(perfect.f1, 1.0);
  const auto none = detection_metrics({false, false, false, false}, truth);
  EXPECT_EQ(none.precision, 0.0);
  EXPECT_EQ(none.recall, 0.0);
  EXPECT_EQ(none.f1, 0.0);
  EXPECT_THROW(detection_metrics({true}, truth), ShapeError);
  EXPECT_NEAR(f1_score(0.300, 0.105), 0.156, 1e-3);
}

TEST(DetectionMetrics, F1Bounds) {
  std::mt19937_64 gen(5);
  for (int n = 0; n < 200; ++n) {
    std::vector<bool> a(30), b(30);
    for (int i = 0; i < 30; ++i) {
      a[i] = gen() % 3 == 0;
      b[i] = gen() % 4 == 0;
    }
    const auto m = detection_metrics(a, b);
    EXPECT_GE(m.f1, 0.0);
    EXPECT_LE(m.f1, 2.0 * std::min(m.precision, m.recall) + 1e-12);
  }
}

TEST(BackdoorProxy, InputBlindGeneratorGivesZero) {
  const Tensor constant = vaguegan::testing::random_tensor(3, 16, 16, 2);
  const auto r = backdoor_proxy(
      [&](const Tensor&, std::span<const double> z, std::span<const double>) {
        Tensor out = constant;
        out[0] += z[0];
        return out;
      },
      vaguegan::testing::random_tensor(3, 16, 16, 3), {}, 7, 1);
  EXPECT_EQ(r.delta_i, 0.0);
  EXPECT_EQ(r.per_sample.size(), 7U);
}

TEST(BackdoorProxy, ZeroImageWeightsGiveZero) {
  nn::ParamSet g = nn::init_params(nn::NetworkId::kGenerator, 3, 16);
  auto& w = g.get("conv1.weight");
  for (int o = 0; o < w.shape[0]; ++o) {
    for (int c = 0; c < 3; ++c) {
      for (int k = 0; k < 9; ++k) w.values[(o * w.shape[1] + c) * 9 + k] = 0.0;
    }
  }
  const auto r = backdoor_proxy(g, vaguegan::testing::random_tensor(3, 16, 16, 4), {4, 1.0}, 3, 2);
  EXPECT_EQ(r.delta_i, 0.0);
}

TEST(BackdoorProxy, PassThroughMatchesPatchMean) {
  const ImageTensor x = vaguegan::testing::random_tensor(3, 16, 16, 5);
  const poison::TriggerConfig trig{4, 1.0};
  double expected = 0.0;
  for (int c = 0; c < 3; ++c) {
    for (int y = 12; y < 16; ++y) {
      for (int xx = 12; xx < 16; ++xx) expected += 1.0 - x(c, y, xx);
    }
  }
  expected /= 48.0;
  const auto r = backdoor_proxy(
      [](const Tensor& in, std::span<const double>, std::span<const double>) { return in; }, x,
      trig, 5, 0);
  EXPECT_NEAR(r.delta_i, expected, 1e-6);
  double mean = 0.0;
  for (double v : r.per_sample) mean += v / 5.0;
  EXPECT_NEAR(r.delta_i, mean, 1e-15);
}

TEST(BackdoorProxy, DeterministicPerSeed) {
  const nn::ParamSet g = nn::init_params(nn::NetworkId::kGenerator, 3, 16);
  const ImageTensor x = vaguegan::testing::random_tensor(3, 16, 16, 6);
  const auto a = backdoor_proxy(g, x, {4, 1.0}, 4, 9);
  const auto b = backdoor_proxy(g, x, {4, 1.0}, 4, 9);
  EXPECT_EQ(a.per_sample, b.per_sample);
  EXPECT_THROW(backdoor_proxy(g, x, {4, 1.0}, 0, 9), InvalidConfigError);
}

TEST(FrequencyReport, IdenticalInputsGiveZero) {
  const ImageTensor x = vaguegan::testing::random_tensor(3, 32, 32, 1);
  const auto r = frequency_report(x, x);
  EXPECT_EQ(r.radial_bands.size(), 8U);
  for (double b : r.radial_bands) EXPECT_EQ(b, 0.0);
  EXPECT_EQ(r.total_spectral_energy_diff, 0.0);
  EXPECT_THROW(frequency_report(x, ImageTensor(3, 16, 16)), ShapeError);
}

TEST(FrequencyReport, SinusoidLandsInItsBand) {
  const int n = 32;
  const ImageTensor x(3, n, n);
  for (int k : {2, 6, 11, 15}) {
    ImageTensor xp = x;
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < n; ++y) {
        for (int col = 0; col < n; ++col) {
          xp(c, y, col) = 0.1 * std::cos(2 * std::numbers::pi * k * col / n);
        }
      }
    }
    const auto r = frequency_report(x, xp);
    const int band = radial_band(0, k, n, n, 8);
    const auto dominant = std::max_element(r.radial_bands.begin(), r.radial_bands.end());
    EXPECT_EQ(dominant - r.radial_bands.begin(), band) << "k = " << k;
  }
}

TEST(FrequencyReport, ParsevalEnergy) {
  const ImageTensor x = vaguegan::testing::random_tensor(3, 24, 24, 3);
  const ImageTensor d = vaguegan::testing::random_tensor(3, 24, 24, 4, -0.08, 0.08);
  ImageTensor xp = x;
  double spatial = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xp[i] += d[i];
    spatial += d[i] * d[i];
  }
  const auto r = frequency_report(x, xp);
  EXPECT_NEAR(r.total_spectral_energy_diff / spatial, 1.0, 1e-10);
  EXPECT_LE(r.magnitude_energy_diff, r.total_spectral_energy_diff + 1e-12);
}

TEST(FeatureCollection, UsesDiscriminatorPooledFeatures) {
  const nn::ParamSet d = nn::init_params(nn::NetworkId::kDiscriminator, 1, 16);
  std::vector<LabeledSample> samples;
  for (int i = 0; i < 3; ++i) {
    samples.push_back({vaguegan::testing::random_tensor(3, 16, 16, i), i == 1});
  }
  const auto fm = collect_features(d, samples);
  EXPECT_EQ(fm.rows, 3);
  EXPECT_EQ(fm.cols, nn::kDiscriminatorFeatureDim);
  EXPECT_EQ(fm.labels, (std::vector<bool>{false, true, false}));
  const auto f1 = nn::discriminator_forward(d, samples[1].image).features;
  for (int j = 0; j < fm.cols; ++j) EXPECT_EQ(fm.row(1)[j], f1[j]);
  EXPECT_THROW(collect_features(d, std::span(samples).first(1)), ShapeError);
}
