#include <gtest/gtest.h>

#include "support.hpp"
#include "vaguegan/errors.hpp"
#include "vaguegan/layers.hpp"
#include "vaguegan/networks.hpp"

using namespace vaguegan;
using namespace vaguegan::nn;
using vaguegan::testing::random_bits;
using vaguegan::testing::random_tensor;
using vaguegan::testing::random_vector;

namespace {

Tensor naive_conv(const Tensor& in, std::span<const double> w, std::span<const double> b,
                  int out_c, int stride) {
  const int oh = (in.height() - 1) / stride + 1, ow = (in.width() - 1) / stride + 1;
  Tensor out(out_c, oh, ow);
  for (int o = 0; o < out_c; ++o) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double s = b[o];
        for (int c = 0; c < in.channels(); ++c) {
          for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
              const int iy = y * stride + ky - 1, ix = x * stride + kx - 1;
              if (iy < 0 || ix < 0 || iy >= in.height() || ix >= in.width()) continue;
              s += w[((o * in.channels() + c) * 3 + ky) * 3 + kx] * in(c, iy, ix);
            }
          }
        }
        out(o, y, x) = s;
      }
    }
  }
  return out;
}

double weighted_sum(const Tensor& t, const Tensor& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) s += t[i] * w[i];
  return s;
}

}  // namespace

TEST(Conv, MatchesNaiveOracle) {
  for (int stride : {1, 2}) {
    const Tensor in = random_tensor(3, 7, 9, 1);
    const auto w = random_vector(4 * 3 * 9, 2);
    const auto b = random_vector(4, 3);
    const Tensor got = conv3x3_forward(in, w, b, 4, stride);
    const Tensor want = naive_conv(in, w, b, 4, stride);
    ASSERT_TRUE(got.same_shape(want));
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
}

TEST(Conv, BackwardMatchesFiniteDifferences) {
  for (int stride : {1, 2}) {
    Tensor in = random_tensor(2, 6, 6, 4);
    auto w = random_vector(3 * 2 * 9, 5);
    const auto b = random_vector(3, 6);
    const Tensor probe = random_tensor(3, (6 - 1) / stride + 1, (6 - 1) / stride + 1, 7);
    std::vector<double> gw(w.size(), 0.0), gb(3, 0.0);
    Tensor gin;
    conv3x3_backward(in, w, 3, stride, probe, gw, gb, &gin);
    auto loss = [&] { return weighted_sum(conv3x3_forward(in, w, b, 3, stride), probe); };
    const double h = 1e-5;
    for (std::size_t i = 0; i < w.size(); i += 5) {
      const double s = w[i];
      w[i] = s + h;
      const double up = loss();
      w[i] = s - h;
      const double down = loss();
      w[i] = s;
      EXPECT_NEAR(gw[i], (up - down) / (2 * h), 1e-7);
    }
    for (std::size_t i = 0; i < in.size(); i += 3) {
      const double s = in[i];
      in[i] = s + h;
      const double up = loss();
      in[i] = s - h;
      const double down = loss();
      in[i] = s;
      EXPECT_NEAR(gin[i], (up - down) / (2 * h), 1e-7);
    }
    double probe_sum = 0.0;
    for (int y = 0; y < probe.height(); ++y) {
      for (int x = 0; x < probe.width(); ++x) probe_sum += probe(0, y, x);
    }
    EXPECT_NEAR(gb[0], probe_sum, 1e-10);
  }
}

TEST(Init, DeterministicPerSeed) {
  for (auto id : {NetworkId::kGenerator, NetworkId::kDiscriminator, NetworkId::kPoisoner}) {
    EXPECT_EQ(init_params(id, 5, 16), init_params(id, 5, 16));
    EXPECT_NE(init_params(id, 5, 16), init_params(id, 6, 16));
  }
}

TEST(Init, BiasesZeroWeightsScaledByFanIn) {
  const ParamSet p = init_params(NetworkId::kGenerator, 1, 32);
  const auto specs = architecture(NetworkId::kGenerator, 32);
  ASSERT_EQ(specs.size(), p.params().size());
  for (std::size_t k = 0; k < specs.size(); ++k) {
    const auto& v = p.params()[k].values;
    if (specs[k].is_bias) {
      for (double x : v) EXPECT_EQ(x, 0.0);
      continue;
    }
    double sq = 0.0;
    for (double x : v) sq += x * x;
    const double std_dev = std::sqrt(sq / static_cast<double>(v.size()));
    const double expected = specs[k].gain / std::sqrt(static_cast<double>(specs[k].fan_in));
    EXPECT_NEAR(std_dev, expected, 0.25 * expected) << specs[k].name;
  }
}

TEST(Init, UnknownNetworkRejected) {
  EXPECT_THROW(network_from_string("critic"), InvalidConfigError);
  EXPECT_EQ(network_from_string("poisoner"), NetworkId::kPoisoner);
}

TEST(Init, SideMustBeMultipleOfEight) {
  EXPECT_THROW(init_params(NetworkId::kDiscriminator, 0, 20), InvalidConfigError);
}

TEST(Generator, ZeroParamsGiveZeroOutput) {
  const Tensor x = random_tensor(3, 16, 16, 1);
  const Tensor out = generator_forward(zero_params(NetworkId::kGenerator, 16), x,
                                       random_vector(kLatentDim, 2), random_bits(kFeatureDim, 3));
  for (double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(Generator, ShapeRangeAndPurity) {
  const ParamSet p = init_params(NetworkId::kGenerator, 3, 128);
  const Tensor x = random_tensor(3, 128, 128, 4);
  const auto z = random_vector(kLatentDim, 5, 10.0);
  const auto f = random_bits(kFeatureDim, 6);
  const Tensor a = generator_forward(p, x, z, f);
  EXPECT_EQ(a.channels(), 3);
  EXPECT_EQ(a.height(), 128);
  EXPECT_EQ(a.width(), 128);
  for (double v : a.values()) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_EQ(a, generator_forward(p, x, z, f));
}

TEST(Generator, ShapeMismatchRejected) {
  const ParamSet p = init_params(NetworkId::kGenerator, 3, 16);
  EXPECT_THROW(generator_forward(p, Tensor(3, 24, 24), random_vector(kLatentDim, 1),
                                 random_bits(kFeatureDim, 1)),
               ShapeError);
  EXPECT_THROW(generator_forward(p, Tensor(3, 16, 16), random_vector(7, 1),
                                 random_bits(kFeatureDim, 1)),
               ShapeError);
}

TEST(Discriminator, ZeroParamsGiveHalf) {
  const auto out =
      discriminator_forward(zero_params(NetworkId::kDiscriminator, 16), random_tensor(3, 16, 16, 2));
  EXPECT_EQ(out.prob, 0.5);
}

TEST(Discriminator, RangeMeanAndFeatureLength) {
  const ParamSet p = init_params(NetworkId::kDiscriminator, 9, 32);
  for (std::uint64_t s = 0; s < 4; ++s) {
    const auto out = discriminator_forward(p, random_tensor(3, 32, 32, s));
    EXPECT_EQ(out.features.size(), static_cast<std::size_t>(kDiscriminatorFeatureDim));
    EXPECT_EQ(out.prob_map.height(), 4);
    double mean = 0.0;
    for (double v : out.prob_map.values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      mean += v;
    }
    mean /= static_cast<double>(out.prob_map.size());
    EXPECT_NEAR(out.prob, mean, 1e-6);
  }
}

TEST(Poisoner, EpsZeroAndZeroParamsGiveZero) {
  const Tensor x = random_tensor(3, 16, 16, 1);
  const auto z = random_vector(kPoisonLatentDim, 2);
  const auto a = poisoner_forward(init_params(NetworkId::kPoisoner, 1, 16), x, z, 0.0);
  for (double v : a.values.values()) EXPECT_EQ(v, 0.0);
  const auto b = poisoner_forward(zero_params(NetworkId::kPoisoner, 16), x, z, 0.08);
  for (double v : b.values.values()) EXPECT_EQ(v, 0.0);
}

TEST(Poisoner, BoundedByEps) {
  const Tensor x = random_tensor(3, 16, 16, 3);
  for (std::uint64_t s = 0; s < 10; ++s) {
    ParamSet p = init_params(NetworkId::kPoisoner, s, 16);
    for (auto& t : p.params()) {
      for (double& v : t.values) v *= 20.0;
    }
    const auto d = poisoner_forward(p, x, random_vector(kPoisonLatentDim, s, 5.0), 0.08);
    EXPECT_LE(max_abs(d.values.values()), 0.08);
    EXPECT_EQ(d.eps, 0.08);
  }
}

TEST(Poisoner, NegativeEpsRejected) {
  EXPECT_THROW(poisoner_forward(zero_params(NetworkId::kPoisoner, 16), Tensor(3, 16, 16),
                                random_vector(kPoisonLatentDim, 1), -0.01),
               InvalidConfigError);
}

TEST(Gradients, GeneratorParams) {
  const ParamSet p = init_params(NetworkId::kGenerator, 11, 16);
  const Tensor x = random_tensor(3, 16, 16, 1);
  const auto z = random_vector(kLatentDim, 2);
  const auto f = random_bits(kFeatureDim, 3);
  const Tensor probe = random_tensor(3, 16, 16, 4);
  const auto trace = generator_trace(p, x, z, f);
  ParamSet grad = p.zeros_like();
  generator_backward(p, trace, probe, grad);
  const auto r = vaguegan::testing::grad_check(
      p, grad, [&](const ParamSet& q) { return weighted_sum(generator_forward(q, x, z, f), probe); },
      50, 12);
  EXPECT_GE(r.fraction(), 0.95);
}

TEST(Gradients, DiscriminatorParamsAndInput) {
  const ParamSet p = init_params(NetworkId::kDiscriminator, 13, 16);
  Tensor x = random_tensor(3, 16, 16, 5);
  const auto trace = discriminator_trace(p, x);
  ParamSet grad = p.zeros_like();
  Tensor gin;
  discriminator_backward(p, trace, 1.0, &grad, &gin);
  const auto r = vaguegan::testing::grad_check(
      p, grad, [&](const ParamSet& q) { return discriminator_forward(q, x).prob; }, 50, 14);
  EXPECT_GE(r.fraction(), 0.95);

  int ok = 0;
  const double h = 1e-4;
  for (int n = 0; n < 20; ++n) {
    const std::size_t i = static_cast<std::size_t>(n) * 37 % x.size();
    const double s = x[i];
    x[i] = s + h;
    const double up = discriminator_forward(p, x).prob;
    x[i] = s - h;
    const double down = discriminator_forward(p, x).prob;
    x[i] = s;
    const double num = (up - down) / (2 * h);
    if (std::abs(num - gin[i]) <= 1e-3 * std::max({std::abs(num), std::abs(gin[i]), 1e-7})) ++ok;
  }
  EXPECT_GE(ok, 19);
}

TEST(Gradients, PoisonerParams) {
  const ParamSet p = init_params(NetworkId::kPoisoner, 15, 16);
  const Tensor x = random_tensor(3, 16, 16, 6);
  const auto z = random_vector(kPoisonLatentDim, 7);
  const Tensor probe = random_tensor(3, 16, 16, 8);
  const auto trace = poisoner_trace(p, x, z, 0.08);
  ParamSet grad = p.zeros_like();
  poisoner_backward(p, trace, probe, grad);
  const auto r = vaguegan::testing::grad_check(
      p, grad,
      [&](const ParamSet& q) { return weighted_sum(poisoner_forward(q, x, z, 0.08).values, probe); },
      50, 16);
  EXPECT_GE(r.fraction(), 0.95);
}

TEST(Validate, RejectsWrongNetworkAndNonFinite) {
  ParamSet g = init_params(NetworkId::kGenerator, 1, 16);
  EXPECT_NO_THROW(validate_params(g));
  g.params()[0].values[0] = std::nan("");
  EXPECT_THROW(validate_params(g), NonFiniteError);
  const ParamSet d = init_params(NetworkId::kDiscriminator, 1, 16);
  EXPECT_THROW(generator_forward(d, Tensor(3, 16, 16), random_vector(kLatentDim, 1),
                                 random_bits(kFeatureDim, 1)),
               ShapeError);
}
