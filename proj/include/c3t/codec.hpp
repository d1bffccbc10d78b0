#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "c3t/curve.hpp"
#include "c3t/errors.hpp"
#include "c3t/numeric.hpp"
#include "c3t/profile.hpp"
#include "c3t/special.hpp"

namespace c3t {

inline constexpr int kDefaultGridPoints = 10000;
inline constexpr double kDecodeTolerance = 1e-10;
/// Source variance of U[-1, 1].
inline constexpr double kSourceVariance = 1.0 / 3.0;

// ---------------------------------------------------------------- stretch

/// Half-width of the alpha interval a stretch mode maps [-1, 1] onto.
inline double stretch_half_width(Stretch mode, int n) {
  return mode == Stretch::FullCircle ? std::numbers::pi : 2.0 * std::numbers::pi / n;
}

inline double stretch(double s, Stretch mode, int n) {
  if (!(std::abs(s) <= 1.0)) throw DomainError("source symbol must lie in [-1, 1]");
  return s * stretch_half_width(mode, n);
}

inline double unstretch(double alpha, Stretch mode, int n) {
  return alpha / stretch_half_width(mode, n);
}

// ---------------------------------------------------------------- channel

/// Average power per channel use E[|x|^2] / n under s ~ U[-1, 1].
inline double average_power(const CodeProfile& profile) {
  double total = 0.0;
  for (double r : profile.radii) total += r * r;
  if (profile.odd()) {
    const double h = stretch_half_width(profile.stretch, profile.n);
    total += profile.helix_coeff * profile.helix_coeff * h * h / 3.0;
  }
  return total / profile.n;
}

struct ChannelSpec {
  double snr_db = 0.0;
  double power = 1.0;
  double noise_var = 1.0;

  /// noise_var = power / 10^(snr_db / 10)
  static ChannelSpec from_power(double power, double snr_db) {
    if (!(power > 0.0)) throw DomainError("channel power must be > 0");
    return {snr_db, power, power / std::pow(10.0, snr_db / 10.0)};
  }
  static ChannelSpec for_profile(const CodeProfile& profile, double snr_db) {
    return from_power(average_power(profile), snr_db);
  }
  static ChannelSpec noiseless(double power) { return {std::numeric_limits<double>::infinity(), power, 0.0}; }
};

template <typename Gen>
Vector awgn_channel(std::span<const double> x, const ChannelSpec& spec, Gen& gen) {
  Vector y(x.begin(), x.end());
  if (spec.noise_var == 0.0) return y;
  std::normal_distribution<double> noise(0.0, std::sqrt(spec.noise_var));
  for (double& v : y) v += noise(gen);
  return y;
}

// ---------------------------------------------------------------- encoder

inline Vector encode(const CodeProfile& profile, double s) {
  return evaluate_curve(profile, stretch(s, profile.stretch, profile.n));
}

// ---------------------------------------------------------------- features

enum class FeatureMode { Raw, TorusProjection, AnglesOnly };

inline std::string to_string(FeatureMode m) {
  switch (m) {
    case FeatureMode::Raw: return "raw";
    case FeatureMode::TorusProjection: return "tp";
    default: return "ao";
  }
}

inline FeatureMode feature_mode_from_string(const std::string& s) {
  if (s == "raw") return FeatureMode::Raw;
  if (s == "tp") return FeatureMode::TorusProjection;
  if (s == "ao") return FeatureMode::AnglesOnly;
  throw ValidationError("unknown feature mode '" + s + "' (expected raw, tp or ao)");
}

struct FeatureVector {
  FeatureMode mode = FeatureMode::Raw;
  Vector data;
};

namespace detail {

/// Phase of a pair in (-pi, pi].
inline double pair_angle(double c, double s, int pair) {
  if (std::hypot(c, s) < 1e-12) {
    throw DomainError("angle undefined for zero-norm pair " + std::to_string(pair));
  }
  const double a = std::atan2(s, c);
  return a == -std::numbers::pi ? std::numbers::pi : a;
}

inline void require_even(const CodeProfile& profile, const char* what) {
  if (profile.odd()) throw DomainError(std::string(what) + " requires even n");
}

}  // namespace detail

/// Per-pair angle from atan2, then the point on the flat torus with the known radii.
inline FeatureVector torus_projection(const CodeProfile& profile, std::span<const double> y) {
  detail::require_even(profile, "torus projection");
  if (y.size() != static_cast<std::size_t>(profile.n)) throw DomainError("channel output width mismatch");
  FeatureVector f{FeatureMode::TorusProjection, Vector(y.size())};
  for (int i = 0; i < profile.pairs(); ++i) {
    const double a = detail::pair_angle(y[2 * i], y[2 * i + 1], i);
    f.data[2 * i] = profile.radii[i] * std::cos(a);
    f.data[2 * i + 1] = profile.radii[i] * std::sin(a);
  }
  return f;
}

/// Pair phases eta_i = atan2(y_2i, y_2i-1); pair amplitudes are discarded.
inline FeatureVector angles_features(std::span<const double> y) {
  if (y.size() % 2 != 0 || y.empty()) throw DomainError("angles-only features require even n");
  FeatureVector f{FeatureMode::AnglesOnly, Vector(y.size() / 2)};
  for (std::size_t i = 0; i < f.data.size(); ++i) {
    f.data[i] = detail::pair_angle(y[2 * i], y[2 * i + 1], static_cast<int>(i));
  }
  return f;
}

inline FeatureVector extract_features(const CodeProfile& profile, std::span<const double> y,
                                      FeatureMode mode) {
  switch (mode) {
    case FeatureMode::Raw: return {FeatureMode::Raw, Vector(y.begin(), y.end())};
    case FeatureMode::TorusProjection: return torus_projection(profile, y);
    default: return angles_features(y);
  }
}

// ---------------------------------------------------------------- MAP decoder

/// Grid-search MAP decoder over the stretch image with golden-section refinement.
///
/// Maximizes <y, x(alpha)> - b^2 alpha^2 / 2, which equals -|y - x(alpha)|^2 / 2
/// up to a constant. decode() is const and allocation-free, so one decoder may
/// serve many threads.
class MapDecoder {
 public:
  MapDecoder(const CodeProfile& profile, int grid_points = kDefaultGridPoints)
      : MapDecoder(profile, profile.stretch, grid_points) {}

  MapDecoder(const CodeProfile& profile, Stretch image, int grid_points)
      : profile_(profile), grid_points_(grid_points) {
    profile.validate();
    if (grid_points < 1000) throw DomainError("MAP grid needs >= 1000 points");
    half_width_ = stretch_half_width(image, profile.n);
    step_ = 2.0 * half_width_ / (grid_points - 1);
    const auto n = static_cast<std::size_t>(profile.n);
    codebook_.resize(n * static_cast<std::size_t>(grid_points));
    penalty_.resize(static_cast<std::size_t>(grid_points));
    for (int j = 0; j < grid_points; ++j) {
      const double alpha = grid_alpha(j);
      const Vector x = evaluate_curve(profile, alpha);
      std::copy(x.begin(), x.end(), codebook_.begin() + static_cast<std::ptrdiff_t>(j * n));
      penalty_[j] = 0.5 * profile.helix_coeff * profile.helix_coeff * alpha * alpha;
    }
  }

  double score(std::span<const double> y, double alpha) const {
    double acc = 0.0;
    for (int i = 0; i < profile_.pairs(); ++i) {
      const double phase = profile_.frequencies[i] * alpha;
      acc += profile_.radii[i] * (y[2 * i] * std::cos(phase) + y[2 * i + 1] * std::sin(phase));
    }
    if (profile_.odd()) {
      const double b = profile_.helix_coeff;
      acc += y.back() * b * alpha - 0.5 * b * b * alpha * alpha;
    }
    return acc;
  }

  /// Estimated alpha, inside the stretch image.
  double decode_alpha(std::span<const double> y) const {
    const auto n = static_cast<std::size_t>(profile_.n);
    if (y.size() != n) throw DomainError("channel output width mismatch");
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < grid_points_; ++j) {
      const double* x = codebook_.data() + static_cast<std::size_t>(j) * n;
      double acc = -penalty_[j];
      for (std::size_t c = 0; c < n; ++c) acc += y[c] * x[c];
      if (acc > best_score) {
        best_score = acc;
        best = j;
      }
    }
    const double lo = grid_alpha(std::max(best - 1, 0));
    const double hi = grid_alpha(std::min(best + 1, grid_points_ - 1));
    auto [alpha, value] =
        golden_section_maximize([&](double a) { return score(y, a); }, lo, hi, kDecodeTolerance);
    if (value < score(y, grid_alpha(best))) return grid_alpha(best);
    return polish(y, alpha, lo, hi);
  }

  /// Estimated source symbol, clamped to [-1, 1]. The image only narrows the
  /// search; the symbol is always read through the encoder's stretch.
  double decode(std::span<const double> y) const {
    return std::clamp(unstretch(decode_alpha(y), profile_.stretch, profile_.n), -1.0, 1.0);
  }

  const CodeProfile& profile() const noexcept { return profile_; }
  int grid_points() const noexcept { return grid_points_; }

 private:
  double grid_alpha(int j) const { return -half_width_ + j * step_; }

  /// Newton steps on the score derivative. Golden section on values stalls
  /// near sqrt(eps); a step is kept only if it stays in [lo, hi] and does not
  /// lower the score.
  double polish(std::span<const double> y, double alpha, double lo, double hi) const {
    double current = score(y, alpha);
    for (int it = 0; it < 4; ++it) {
      double d1 = 0.0;
      double d2 = 0.0;
      for (int i = 0; i < profile_.pairs(); ++i) {
        const double w = profile_.frequencies[i];
        const double c = y[2 * i] * std::cos(w * alpha) + y[2 * i + 1] * std::sin(w * alpha);
        const double s = -y[2 * i] * std::sin(w * alpha) + y[2 * i + 1] * std::cos(w * alpha);
        d1 += profile_.radii[i] * w * s;
        d2 -= profile_.radii[i] * w * w * c;
      }
      if (profile_.odd()) {
        const double b = profile_.helix_coeff;
        d1 += y.back() * b - b * b * alpha;
        d2 -= b * b;
      }
      if (!(d2 < 0.0)) break;
      const double next = alpha - d1 / d2;
      if (next < lo || next > hi) break;
      const double value = score(y, next);
      if (value < current) break;
      if (next == alpha) break;
      alpha = next;
      current = value;
    }
    return alpha;
  }

  CodeProfile profile_;
  int grid_points_;
  double half_width_ = 0.0;
  double step_ = 0.0;
  Vector codebook_;  // grid_points x n, row-major
  Vector penalty_;
};

inline double map_decode(const CodeProfile& profile, std::span<const double> y,
                         int grid_points = kDefaultGridPoints) {
  return MapDecoder(profile, grid_points).decode(y);
}

// ---------------------------------------------------------------- angles-only likelihood

namespace detail {

inline double scaled_q(double r, double eta, double phase, double noise_var) {
  return r * std::cos(eta - phase) / std::sqrt(2.0 * noise_var);
}

}  // namespace detail

/// log(1 + sqrt(pi) q exp(q^2) erfc(-q)), the per-pair phase factor.
///
/// The factor times exp(-r^2 / (2 sigma^2)) / (2 pi) is the density of the
/// phase of a Gaussian pair with mean r(cos phi, sin phi).
inline double log_phase_factor(double q) {
  const double sqrt_pi = std::sqrt(std::numbers::pi);
  if (q == 0.0) return 0.0;
  if (q > 0.0) {
    if (q <= 5.0) return std::log1p(sqrt_pi * q * erfcx(-q));
    // erfcx(-q) = 2 exp(q^2) - erfcx(q)
    return q * q + std::log(2.0 * sqrt_pi * q + std::exp(-q * q) * (1.0 - sqrt_pi * q * erfcx(q)));
  }
  const double u = -q;
  if (u <= 10.0) return std::log(1.0 - sqrt_pi * u * erfcx(u));
  // 1 - sqrt(pi) u erfcx(u) = sum_k (-1)^(k+1) (2k-1)!! / (2u^2)^k
  const double inv = 1.0 / (2.0 * u * u);
  double term = 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 20; ++k) {
    term *= (2.0 * k - 1.0) * inv;
    const double signed_term = (k % 2 == 1) ? term : -term;
    sum += signed_term;
    if (term < 1e-17 * sum) break;
  }
  return std::log(sum);
}

/// Closed-form approximation of sqrt(pi) q exp(q^2) erfc(q) for q >= 0,
/// extended to q < 0 by the exact reflection 2 sqrt(pi) q exp(q^2) + h(-q).
inline double angles_likelihood_approx(double q) {
  if (!std::isfinite(q)) throw DomainError("q must be finite");
  if (q == 0.0) return 0.0;
  if (q < 0.0) {
    return 2.0 * std::sqrt(std::numbers::pi) * q * std::exp(q * q) + angles_likelihood_approx(-q);
  }
  constexpr double a = 0.8577;
  constexpr double b = 0.024;
  const double c = 1.0 - 2.0 / std::numbers::pi;
  const double poly = a * (1.0 - b * q * q * (1.0 - (a / (std::numbers::pi * std::numbers::pi)) * q));
  const double phi = 1.0 - c * std::exp(-q * poly);
  return 2.0 / (1.0 + std::sqrt(1.0 + 2.0 * phi / (q * q)));
}

/// log_phase_factor with the closed approximation in place of erfc.
inline double log_phase_factor_approx(double q) {
  if (q == 0.0) return 0.0;
  if (q < 0.0) return std::log(1.0 - angles_likelihood_approx(-q));
  const double h = angles_likelihood_approx(q);
  const double sqrt_pi = std::sqrt(std::numbers::pi);
  if (q <= 5.0) return std::log(1.0 + 2.0 * sqrt_pi * q * std::exp(q * q) - h);
  return q * q + std::log(2.0 * sqrt_pi * q + std::exp(-q * q) * (1.0 - h));
}

/// Angles-only log-likelihood of alpha, dropping alpha-independent terms.
inline double angles_log_likelihood(const CodeProfile& profile, std::span<const double> eta,
                                    double alpha, double noise_var, bool approximate = false) {
  detail::require_even(profile, "angles-only likelihood");
  if (eta.size() != static_cast<std::size_t>(profile.pairs())) throw DomainError("angle vector width mismatch");
  if (!(noise_var > 0.0)) throw DomainError("angles-only likelihood needs noise_var > 0");
  double acc = 0.0;
  for (int i = 0; i < profile.pairs(); ++i) {
    const double q = detail::scaled_q(profile.radii[i], eta[i], profile.frequencies[i] * alpha, noise_var);
    acc += approximate ? log_phase_factor_approx(q) : log_phase_factor(q);
  }
  return acc;
}

/// Normalized joint log-density of the pair phases given alpha.
inline double angles_log_density(const CodeProfile& profile, std::span<const double> eta,
                                 double alpha, double noise_var) {
  double acc = angles_log_likelihood(profile, eta, alpha, noise_var);
  for (double r : profile.radii) acc += -r * r / (2.0 * noise_var) - std::log(2.0 * std::numbers::pi);
  return acc;
}

/// Grid-plus-golden maximizer of the angles-only likelihood over the
/// AliasingSafe image. Phase tables are precomputed; decode() is const.
class AnglesDecoder {
 public:
  AnglesDecoder(const CodeProfile& profile, double noise_var, int grid_points = kDefaultGridPoints,
                bool approximate = false)
      : profile_(profile), noise_var_(noise_var), grid_points_(grid_points), approximate_(approximate) {
    profile.validate();
    detail::require_even(profile, "angles-only decoding");
    if (profile.stretch != Stretch::AliasingSafe) {
      throw ValidationError("angles-only decoding requires the aliasing_safe stretch");
    }
    if (!(noise_var > 0.0)) throw DomainError("angles-only decoding needs noise_var > 0");
    if (grid_points < 1000) throw DomainError("grid needs >= 1000 points");
    half_width_ = stretch_half_width(Stretch::AliasingSafe, profile.n);
    step_ = 2.0 * half_width_ / (grid_points - 1);
    const auto m = static_cast<std::size_t>(profile.pairs());
    cos_.resize(m * static_cast<std::size_t>(grid_points));
    sin_.resize(cos_.size());
    for (int j = 0; j < grid_points; ++j) {
      for (std::size_t i = 0; i < m; ++i) {
        const double phase = profile.frequencies[i] * grid_alpha(j);
        cos_[j * m + i] = std::cos(phase);
        sin_[j * m + i] = std::sin(phase);
      }
    }
  }

  double log_likelihood(std::span<const double> eta, double alpha) const {
    return angles_log_likelihood(profile_, eta, alpha, noise_var_, approximate_);
  }

  double decode_alpha(std::span<const double> eta) const {
    const auto m = static_cast<std::size_t>(profile_.pairs());
    if (eta.size() != m) throw DomainError("angle vector width mismatch");
    const double scale = 1.0 / std::sqrt(2.0 * noise_var_);
    Vector ce(m);
    Vector se(m);
    for (std::size_t i = 0; i < m; ++i) {
      ce[i] = profile_.radii[i] * scale * std::cos(eta[i]);
      se[i] = profile_.radii[i] * scale * std::sin(eta[i]);
    }
    int best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < grid_points_; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        // r cos(eta - w alpha) / sqrt(2 sigma^2)
        const double q = ce[i] * cos_[j * m + i] + se[i] * sin_[j * m + i];
        acc += approximate_ ? log_phase_factor_approx(q) : log_phase_factor(q);
      }
      if (acc > best_value) {
        best_value = acc;
        best = j;
      }
    }
    const double lo = grid_alpha(std::max(best - 1, 0));
    const double hi = grid_alpha(std::min(best + 1, grid_points_ - 1));
    auto [alpha, value] = golden_section_maximize([&](double a) { return log_likelihood(eta, a); },
                                                  lo, hi, kDecodeTolerance);
    return value >= log_likelihood(eta, grid_alpha(best)) ? alpha : grid_alpha(best);
  }

  double decode(std::span<const double> eta) const {
    return std::clamp(unstretch(decode_alpha(eta), Stretch::AliasingSafe, profile_.n), -1.0, 1.0);
  }

 private:
  double grid_alpha(int j) const { return -half_width_ + j * step_; }

  CodeProfile profile_;
  double noise_var_;
  int grid_points_;
  bool approximate_;
  double half_width_ = 0.0;
  double step_ = 0.0;
  Vector cos_;
  Vector sin_;
};

inline double angles_map_decode(const CodeProfile& profile, std::span<const double> eta,
                                double noise_var, int grid_points = kDefaultGridPoints) {
  return AnglesDecoder(profile, noise_var, grid_points).decode(eta);
}

// ---------------------------------------------------------------- repetition baseline

/// Channel for the n-fold repetition code: per-use power 1/n.
inline ChannelSpec repetition_channel(int n, double snr_db) {
  return ChannelSpec::from_power(1.0 / n, snr_db);
}

/// Sends s sqrt(3P) n times and averages. The unclamped mean attains
/// SDR = n SNR exactly; clamping to [-1, 1] is optional and only helps.
template <typename Gen>
double repetition_code(int n, double s, const ChannelSpec& spec, Gen& gen, bool clamp = false) {
  if (n < 1) throw DomainError("repetition length must be >= 1");
  if (!(std::abs(s) <= 1.0)) throw DomainError("source symbol must lie in [-1, 1]");
  const double amplitude = std::sqrt(3.0 * spec.power);
  const Vector x(static_cast<std::size_t>(n), s * amplitude);
  const Vector y = awgn_channel(x, spec, gen);
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= n * amplitude;
  return clamp ? std::clamp(mean, -1.0, 1.0) : mean;
}

}  // namespace c3t
