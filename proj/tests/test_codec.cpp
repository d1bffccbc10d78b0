#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "c3t/codec.hpp"
#include "test_util.hpp"

using namespace c3t;
using c3t::testing::exact_n4;
using c3t::testing::random_profile;
using c3t::testing::rel_err;

namespace {

constexpr double kPi = std::numbers::pi;

double sq_dist(const Vector& a, const Vector& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc;
}

/// Composite Simpson rule on [a, b] with an even number of panels.
template <typename F>
long double simpson(F f, long double a, long double b, int panels) {
  const long double h = (b - a) / panels;
  long double acc = f(a) + f(b);
  for (int i = 1; i < panels; ++i) acc += (i % 2 == 1 ? 4.0L : 2.0L) * f(a + i * h);
  return acc * h / 3.0L;
}

/// Phase density of a Gaussian pair with mean r(cos phi, sin phi), by
/// integrating the polar density over the amplitude.
double phase_density_oracle(double r, double phi, double eta, double noise_var) {
  const long double s2 = noise_var;
  const auto f = [&](long double rho) {
    const long double d2 = rho * rho - 2.0L * rho * r * std::cos(eta - phi) + static_cast<long double>(r) * r;
    return rho / (2.0L * std::numbers::pi_v<long double> * s2) * std::exp(-d2 / (2.0L * s2));
  };
  return static_cast<double>(simpson(f, 0.0L, r + 14.0L * std::sqrt(s2), 40000));
}

/// log(1 + sqrt(pi) q exp(q^2) erfc(-q)) in extended precision.
double log_phase_factor_oracle(double q) {
  const long double lq = q;
  const long double v = 1.0L + std::sqrt(std::numbers::pi_v<long double>) * lq * std::exp(lq * lq) * std::erfc(-lq);
  return static_cast<double>(std::log(v));
}

}  // namespace

// ---------------------------------------------------------------- stretch, channel, encoder

TEST(Stretch, Examples) {
  EXPECT_NEAR(stretch(0.5, Stretch::FullCircle, 4), kPi / 2.0, 1e-15);
  EXPECT_NEAR(stretch(0.5, Stretch::AliasingSafe, 4), kPi / 4.0, 1e-15);
  EXPECT_NEAR(stretch(-1.0, Stretch::AliasingSafe, 8), -kPi / 4.0, 1e-15);
  EXPECT_NEAR(unstretch(stretch(0.3, Stretch::AliasingSafe, 6), Stretch::AliasingSafe, 6), 0.3, 1e-15);
  EXPECT_THROW(stretch(1.5, Stretch::FullCircle, 4), DomainError);
  EXPECT_THROW(stretch(std::nan(""), Stretch::FullCircle, 4), DomainError);
}

TEST(Channel, PowerAndNoiseVariance) {
  EXPECT_NEAR(average_power(exact_n4()), 0.25, 1e-15);
  const auto spec = ChannelSpec::for_profile(exact_n4(), 10.0);
  EXPECT_NEAR(spec.noise_var, 0.025, 1e-15);
  EXPECT_THROW(ChannelSpec::from_power(0.0, 0.0), DomainError);
  // odd n: helix power b^2 h^2 / 3 with h the stretch half-width
  const auto helix = CodeProfile::harmonic(3, {0.6}, 0.2, Stretch::FullCircle);
  EXPECT_NEAR(average_power(helix), (0.36 + 0.04 * kPi * kPi / 3.0) / 3.0, 1e-15);
}

TEST(Channel, AveragePowerMatchesSampling) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int n : {3, 5, 6}) {
    const auto p = random_profile(n, gen);
    double acc = 0.0;
    const int draws = 200000;
    for (int t = 0; t < draws; ++t) {
      const Vector x = encode(p, u(gen));
      for (double v : x) acc += v * v;
    }
    EXPECT_NEAR(acc / draws / n, average_power(p), 0.01 * average_power(p)) << "n=" << n;
  }
}

TEST(Channel, AwgnVarianceOverAMillionDraws) {
  std::mt19937_64 gen(4);
  const auto spec = ChannelSpec::from_power(0.25, 3.0);
  const Vector x{0.5, -0.5};
  double mean = 0.0;
  double var = 0.0;
  const int draws = 500000;
  for (int t = 0; t < draws; ++t) {
    const Vector y = awgn_channel(x, spec, gen);
    for (int i = 0; i < 2; ++i) {
      const double e = y[i] - x[i];
      mean += e;
      var += e * e;
    }
  }
  mean /= 2.0 * draws;
  var /= 2.0 * draws;
  EXPECT_NEAR(mean, 0.0, 1e-3);
  EXPECT_NEAR(var, spec.noise_var, 0.01 * spec.noise_var);
}

TEST(Channel, NoiselessIsIdentity) {
  std::mt19937_64 gen(5);
  const Vector x{0.1, 0.2, 0.3};
  EXPECT_EQ(awgn_channel(x, ChannelSpec::noiseless(1.0), gen), x);
}

TEST(Encoder, Examples) {
  const auto x = encode(exact_n4(), 0.5);
  EXPECT_NEAR(x[0], 0.0, 1e-15);
  EXPECT_NEAR(x[1], std::sqrt(2.0 / 3.0), 1e-15);
  EXPECT_NEAR(x[2], -std::sqrt(1.0 / 3.0), 1e-15);
  EXPECT_NEAR(x[3], 0.0, 1e-15);
  const auto safe = encode(exact_n4(Stretch::AliasingSafe), 1.0);
  EXPECT_NEAR(safe[2], -std::sqrt(1.0 / 3.0), 1e-15);
}

// ---------------------------------------------------------------- MAP decoder

TEST(MapDecoder, NoiselessRoundTrip) {
  for (Stretch mode : {Stretch::FullCircle, Stretch::AliasingSafe}) {
    const MapDecoder dec(exact_n4(mode));
    for (double s = -0.99; s <= 0.99; s += 0.0137) {
      EXPECT_NEAR(dec.decode(encode(exact_n4(mode), s)), s, 1e-8) << "s=" << s;
    }
  }
}

TEST(MapDecoder, OddDimensionRoundTrip) {
  std::mt19937_64 gen(6);
  for (int n : {3, 5, 7}) {
    const auto p = random_profile(n, gen, Stretch::AliasingSafe);
    const MapDecoder dec(p);
    for (double s = -1.0; s <= 1.0; s += 0.05) EXPECT_NEAR(dec.decode(encode(p, s)), s, 1e-8);
  }
}

TEST(MapDecoder, MatchesEuclideanArgminOverAFineGrid) {
  std::mt19937_64 gen(7);
  std::normal_distribution<double> noise(0.0, 0.4);
  for (int n : {4, 5, 6}) {
    const auto p = random_profile(n, gen);
    const MapDecoder dec(p);
    for (int t = 0; t < 20; ++t) {
      Vector y = encode(p, std::uniform_real_distribution<double>(-1.0, 1.0)(gen));
      for (double& v : y) v += noise(gen);
      const double alpha = dec.decode_alpha(y);
      const double got = sq_dist(y, evaluate_curve(p, alpha));
      double best = std::numeric_limits<double>::infinity();
      const int fine = 200000;
      for (int j = 0; j <= fine; ++j) {
        best = std::min(best, sq_dist(y, evaluate_curve(p, -kPi + 2.0 * kPi * j / fine)));
      }
      EXPECT_LE(got, best + 1e-9) << "n=" << n;
    }
  }
}

TEST(MapDecoder, EvenDimensionIsScaleInvariant) {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> noise(0.0, 1.0);
  const auto p = random_profile(6, gen);
  const MapDecoder dec(p);
  for (int t = 0; t < 50; ++t) {
    Vector y(6);
    for (double& v : y) v = noise(gen);
    Vector y3 = y;
    for (double& v : y3) v *= 3.0;
    EXPECT_NEAR(dec.decode(y), dec.decode(y3), 1e-8);
  }
}

TEST(MapDecoder, RestrictedImageStaysInside) {
  const auto p = exact_n4();
  const MapDecoder dec(p, Stretch::AliasingSafe, 2000);
  std::mt19937_64 gen(9);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    Vector y(4);
    for (double& v : y) v = noise(gen);
    EXPECT_LE(std::abs(dec.decode_alpha(y)), kPi / 2.0 + 1e-12);
    EXPECT_LE(std::abs(dec.decode(y)), 0.5 + 1e-12);
  }
  EXPECT_NEAR(dec.decode(encode(p, 0.3)), 0.3, 1e-8);
}

TEST(MapDecoder, RejectsCoarseGridAndWidthMismatch) {
  EXPECT_THROW(MapDecoder(exact_n4(), 999), DomainError);
  const MapDecoder dec(exact_n4());
  EXPECT_THROW(dec.decode(Vector{1.0, 2.0}), DomainError);
}

// ---------------------------------------------------------------- features

TEST(TorusProjection, IdempotentWithExactPairNorms) {
  std::mt19937_64 gen(10);
  std::normal_distribution<double> noise(0.0, 1.0);
  const auto p = random_profile(8, gen);
  for (int t = 0; t < 100; ++t) {
    Vector y(8);
    for (double& v : y) v = noise(gen);
    const auto f = torus_projection(p, y);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(std::hypot(f.data[2 * i], f.data[2 * i + 1]), p.radii[i], 1e-14);
    const auto g = torus_projection(p, f.data);
    for (int c = 0; c < 8; ++c) EXPECT_NEAR(g.data[c], f.data[c], 1e-14);
  }
}

TEST(TorusProjection, ReducesNoiseAtModerateSnr) {
  std::mt19937_64 gen(11);
  const auto p = exact_n4();
  const auto spec = ChannelSpec::for_profile(p, 10.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double raw = 0.0;
  double tp = 0.0;
  for (int t = 0; t < 20000; ++t) {
    const Vector x = encode(p, u(gen));
    const Vector y = awgn_channel(x, spec, gen);
    raw += sq_dist(y, x);
    tp += sq_dist(torus_projection(p, y).data, x);
  }
  EXPECT_LT(tp, 0.6 * raw);
}

TEST(TorusProjection, RejectsOddAndZeroPairs) {
  const auto helix = CodeProfile::harmonic(3, {0.6}, 0.2, Stretch::FullCircle);
  EXPECT_THROW(torus_projection(helix, Vector{1.0, 0.0, 0.0}), DomainError);
  EXPECT_THROW(torus_projection(exact_n4(), Vector{0.0, 0.0, 1.0, 0.0}), DomainError);
}

TEST(AnglesFeatures, RangeAndBranchCut) {
  const auto f = angles_features(Vector{-1.0, -0.0, 0.0, 1.0});
  EXPECT_EQ(f.data[0], kPi);
  EXPECT_NEAR(f.data[1], kPi / 2.0, 1e-15);
  std::mt19937_64 gen(12);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    Vector y(6);
    for (double& v : y) v = noise(gen);
    for (double a : angles_features(y).data) {
      EXPECT_GT(a, -kPi);
      EXPECT_LE(a, kPi);
    }
  }
  EXPECT_THROW(angles_features(Vector{1.0, 2.0, 3.0}), DomainError);
}

TEST(Features, ModeStringsRoundTrip) {
  for (auto m : {FeatureMode::Raw, FeatureMode::TorusProjection, FeatureMode::AnglesOnly}) {
    EXPECT_EQ(feature_mode_from_string(to_string(m)), m);
  }
  EXPECT_THROW(feature_mode_from_string("polar"), ValidationError);
  const Vector y{0.3, 0.4, -0.1, 0.2};
  EXPECT_EQ(extract_features(exact_n4(), y, FeatureMode::Raw).data, y);
  EXPECT_EQ(extract_features(exact_n4(), y, FeatureMode::AnglesOnly).data.size(), 2U);
}

// ---------------------------------------------------------------- angles-only likelihood

TEST(PhaseFactor, MatchesExtendedPrecision) {
  for (double q = -8.0; q <= 8.0; q += 0.0625) {
    if (q == 0.0) continue;
    const double want = log_phase_factor_oracle(q);
    EXPECT_NEAR(log_phase_factor(q), want, 1e-10 * std::max(1.0, std::abs(want))) << "q=" << q;
  }
  EXPECT_EQ(log_phase_factor(0.0), 0.0);
}

TEST(PhaseFactor, ContinuousAcrossBranchSwitches) {
  for (double q : {5.0, -10.0}) {
    const double lo = log_phase_factor(q - 1e-9);
    const double hi = log_phase_factor(q + 1e-9);
    EXPECT_NEAR(lo, hi, 1e-7 * std::max(1.0, std::abs(lo))) << "q=" << q;
  }
  EXPECT_TRUE(std::isfinite(log_phase_factor(-200.0)));
  EXPECT_TRUE(std::isfinite(log_phase_factor(200.0)));
}

TEST(AnglesLikelihood, MatchesAmplitudeIntegralOracle) {
  const double r = 0.8;
  const double phi = 0.4;
  for (double noise_var : {0.05, 0.3, 1.5}) {
    for (double eta = -3.0; eta <= 3.0; eta += 0.5) {
      const auto p = CodeProfile::harmonic(2, {r}, 0.0, Stretch::AliasingSafe);
      const double got = std::exp(angles_log_density(p, Vector{eta}, phi, noise_var));
      const double want = phase_density_oracle(r, phi, eta, noise_var);
      EXPECT_LT(rel_err(got, want), 1e-6) << "var=" << noise_var << " eta=" << eta;
    }
  }
}

TEST(AnglesLikelihood, PrintedSignIsTheAntipodalDensity) {
  // 1 - sqrt(pi) q exp(q^2) erfc(q) is the factor at -q: it peaks opposite the
  // transmitted phase and fails the amplitude-integral oracle
  const double r = 0.8;
  const double noise_var = 0.1;
  const double phi = 0.4;
  const double q = detail::scaled_q(r, phi, phi, noise_var);
  const double base = -r * r / (2.0 * noise_var) - std::log(2.0 * kPi);
  const double want = phase_density_oracle(r, phi, phi, noise_var);
  EXPECT_LT(rel_err(std::exp(base + log_phase_factor(q)), want), 1e-6);
  EXPECT_GT(rel_err(std::exp(base + log_phase_factor(-q)), want), 0.5);
  EXPECT_LT(rel_err(std::exp(base + log_phase_factor(-q)), phase_density_oracle(r, phi, phi + kPi, noise_var)), 1e-6);
}

TEST(AnglesLikelihood, TwoDimensionalDensityIntegratesToOne) {
  const auto p = CodeProfile::harmonic(2, {1.0}, 0.0, Stretch::AliasingSafe);
  for (double noise_var : {0.01, 0.2, 2.0}) {
    const auto f = [&](long double eta) {
      return static_cast<long double>(
          std::exp(angles_log_density(p, Vector{static_cast<double>(eta)}, 0.7, noise_var)));
    };
    EXPECT_NEAR(static_cast<double>(simpson(f, -kPi, kPi, 4000)), 1.0, 1e-4) << "var=" << noise_var;
  }
}

TEST(AnglesLikelihood, ApproximationErrorIsSmall) {
  double worst = 0.0;
  for (double q = 0.01; q <= 10.0; q += 0.01) {
    const double exact = std::sqrt(kPi) * q * erfcx(q);
    worst = std::max(worst, rel_err(angles_likelihood_approx(q), exact));
  }
  EXPECT_LT(worst, 2e-4);
  const double at1 = std::sqrt(kPi) * erfcx(1.0);
  EXPECT_LT(rel_err(angles_likelihood_approx(1.0), at1), 0.02);
  // for q < 0 the log is of 1 - h(|q|), so the relative error grows by h / (1 - h)
  for (double q : {-0.5, -1.0, -2.0, -4.0}) {
    const double h = std::sqrt(kPi) * -q * erfcx(-q);
    EXPECT_NEAR(log_phase_factor_approx(q), log_phase_factor(q), 1.01 * worst * h / (1.0 - h)) << "q=" << q;
  }
  EXPECT_THROW(angles_likelihood_approx(std::nan("")), DomainError);
}

TEST(AnglesDecoder, RequiresAliasingSafeStretch) {
  EXPECT_THROW(AnglesDecoder(exact_n4(Stretch::FullCircle), 0.1), ValidationError);
  EXPECT_THROW(AnglesDecoder(exact_n4(Stretch::AliasingSafe), 0.0), DomainError);
}

TEST(AnglesDecoder, RecoversSymbolAtHighSnr) {
  const auto p = exact_n4(Stretch::AliasingSafe);
  const AnglesDecoder dec(p, 1e-6);
  for (double s = -0.99; s <= 0.99; s += 0.033) {
    EXPECT_NEAR(dec.decode(angles_features(encode(p, s)).data), s, 1e-6) << "s=" << s;
  }
}

TEST(AnglesDecoder, RefinementBeatsEveryGridPoint) {
  std::mt19937_64 gen(13);
  const auto p = random_profile(6, gen, Stretch::AliasingSafe);
  const double noise_var = 0.2;
  const AnglesDecoder dec(p, noise_var, 1000);
  const auto spec = ChannelSpec{0.0, average_power(p), noise_var};
  for (int t = 0; t < 20; ++t) {
    const Vector y = awgn_channel(encode(p, 0.1 * t - 0.95), spec, gen);
    const Vector eta = angles_features(y).data;
    const double alpha = dec.decode_alpha(eta);
    const double best = dec.log_likelihood(eta, alpha);
    const double h = 2.0 * kPi / 6.0;
    for (int j = 0; j <= 3000; ++j) {
      EXPECT_GE(best, dec.log_likelihood(eta, -h + 2.0 * h * j / 3000) - 1e-9);
    }
  }
}

TEST(AnglesDecoder, ApproximateLikelihoodDecodesAlike) {
  std::mt19937_64 gen(14);
  const auto p = exact_n4(Stretch::AliasingSafe);
  const auto spec = ChannelSpec::for_profile(p, 10.0);
  const AnglesDecoder exact(p, spec.noise_var, 2000, false);
  const AnglesDecoder approx(p, spec.noise_var, 2000, true);
  for (int t = 0; t < 100; ++t) {
    const Vector y = awgn_channel(encode(p, 0.019 * t - 0.95), spec, gen);
    const Vector eta = angles_features(y).data;
    EXPECT_NEAR(exact.decode(eta), approx.decode(eta), 1e-3);
  }
}

// ---------------------------------------------------------------- repetition

TEST(Repetition, NoiselessReturnsTheSymbol) {
  std::mt19937_64 gen(15);
  EXPECT_NEAR(repetition_code(4, 0.37, ChannelSpec::noiseless(0.25), gen), 0.37, 1e-15);
  EXPECT_THROW(repetition_code(0, 0.0, ChannelSpec::noiseless(1.0), gen), DomainError);
  EXPECT_THROW(repetition_code(4, 1.2, ChannelSpec::noiseless(1.0), gen), DomainError);
}

TEST(Repetition, MseIsSourceVarianceOverNSnr) {
  std::mt19937_64 gen(16);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto spec = repetition_channel(4, 10.0);
  EXPECT_NEAR(spec.power, 0.25, 1e-15);
  double mse = 0.0;
  const int trials = 200000;
  for (int t = 0; t < trials; ++t) {
    const double s = u(gen);
    const double e = repetition_code(4, s, spec, gen) - s;
    mse += e * e / trials;
  }
  EXPECT_LT(rel_err(mse, kSourceVariance / 40.0), 0.02);
}

TEST(Repetition, ClampKeepsEstimateInRange) {
  std::mt19937_64 gen(17);
  const auto spec = repetition_channel(2, -5.0);
  for (int t = 0; t < 1000; ++t) {
    const double v = repetition_code(2, 0.99, spec, gen, true);
    EXPECT_LE(std::abs(v), 1.0);
  }
}
