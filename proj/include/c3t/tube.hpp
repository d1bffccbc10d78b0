#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "c3t/curve.hpp"
#include "c3t/errors.hpp"
#include "c3t/numeric.hpp"
#include "c3t/profile.hpp"

namespace c3t {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kLimitThreshold = 1e-6;
inline constexpr double kDefaultGridStep = 1e-4;
inline constexpr double kRefineTolerance = 1e-8;

/// Derived tube geometry of a profile.
struct TubeMetrics {
  double rho_global = 0.0;
  double path_length = 0.0;
  double density = 0.0;
  double argmin_delta = 0.0;  ///< 0 encodes the coincident-point limit
};

/// rho(Delta) sampled on a grid, plus the Delta -> 0 limit.
struct CircumradiusProfile {
  Vector deltas;
  Vector rho_values;
  double limit_at_zero = 0.0;
};

struct GlobalCircumradius {
  double rho_global = 0.0;
  double argmin_delta = 0.0;
};

/// Squared circumradius as a function of the parameter offset Delta.
///
/// Uses rho^2 = t1^2 t2 / (4 (t1 t2 - t3^2)). The difference t1 t2 - t3^2 is
/// O(Delta^4) and cancels catastrophically when formed directly, so it is
/// expanded into a pairwise sum of nonnegative terms built from half-angle
/// sines. The linear helix coordinate enters as a component with unit
/// frequency, sine Delta/2 and cosine 1.
class CircumradiusEvaluator {
 public:
  explicit CircumradiusEvaluator(const CodeProfile& profile)
      : closed_(!profile.odd() || profile.helix_coeff == 0.0) {
    profile.validate();
    for (int i = 0; i < profile.pairs(); ++i) {
      comps_.push_back({profile.radii[i] * profile.radii[i],
                        static_cast<double>(profile.frequencies[i]), false});
    }
    if (profile.odd() && profile.helix_coeff > 0.0) {
      comps_.push_back({profile.helix_coeff * profile.helix_coeff, 1.0, true});
    }
    double a = 0.0;
    double b = 0.0;
    for (const auto& c : comps_) {
      a += c.weight * c.omega * c.omega;
      if (!c.linear) b += c.weight * c.omega * c.omega * c.omega * c.omega;
    }
    limit_sq_ = a * a / b;
    scratch_.resize(comps_.size());
  }

  /// rho^2 at Delta -> 0, equal to 1 / chi_1^2.
  double limit_sq() const noexcept { return limit_sq_; }

  double rho_sq(double delta) const {
    if (!(delta >= 0.0) || delta > kTwoPi + 1e-12) {
      throw DomainError("Delta must lie in (0, 2pi], got " + std::to_string(delta));
    }
    if (delta < kLimitThreshold) return limit_sq_;
    // Integer frequencies close the curve: Delta = 2pi is a coincident pair too.
    if (closed_ && kTwoPi - delta < kLimitThreshold) return limit_sq_;

    double t1 = 0.0;
    double t2 = 0.0;
    for (std::size_t i = 0; i < comps_.size(); ++i) {
      const auto& c = comps_[i];
      auto& h = scratch_[i];
      if (c.linear) {
        h = {delta / 2.0, 1.0, 0.0, 2.0};
      } else {
        const double quarter = c.omega * delta / 4.0;
        const double sh = std::sin(quarter);
        const double ch = std::cos(quarter);
        h = {2.0 * sh * ch, ch * ch - sh * sh, 2.0 * sh * sh, 2.0 * ch * ch};
      }
      t1 += 4.0 * c.weight * h.s * h.s;
      t2 += c.weight * c.omega * c.omega;
    }
    // t1 t2 - t3^2 = 2 sum_ij w_i w_j [(s_i w_j - s_j w_i)^2 + 2 w_i w_j s_i s_j (1 - c_i c_j)]
    double gap = 0.0;
    for (std::size_t i = 0; i < comps_.size(); ++i) {
      const auto& ci = comps_[i];
      const auto& hi = scratch_[i];
      for (std::size_t j = 0; j < comps_.size(); ++j) {
        const auto& cj = comps_[j];
        const auto& hj = scratch_[j];
        const double cross = hi.s * cj.omega - hj.s * ci.omega;
        gap += ci.weight * cj.weight *
               (cross * cross + 2.0 * ci.omega * cj.omega * hi.s * hj.s * one_minus_cc(hi, hj));
      }
    }
    gap *= 2.0;
    if (gap <= 1e-15 * t1 * t2) {
      throw GeometryError("circumradius denominator vanishes at Delta=" + std::to_string(delta) +
                          " (locally straight curve)");
    }
    return t1 * t1 * t2 / (4.0 * gap);
  }

 private:
  struct Component {
    double weight;
    double omega;
    bool linear;
  };
  struct HalfAngle {
    double s;  // sin(w Delta / 2)
    double c;  // cos(w Delta / 2)
    double u;  // 1 - c
    double v;  // 1 + c
  };

  static double one_minus_cc(const HalfAngle& a, const HalfAngle& b) {
    if (a.c >= 0.0 && b.c >= 0.0) return a.u + b.u - a.u * b.u;
    if (a.c <= 0.0 && b.c <= 0.0) return a.v + b.v - a.v * b.v;
    return 1.0 - a.c * b.c;
  }

  std::vector<Component> comps_;
  mutable std::vector<HalfAngle> scratch_;  // not shared across threads
  double limit_sq_ = 0.0;
  bool closed_ = true;
};

/// rho^2(Delta) for Delta in (0, 2pi]; below 1e-6 the analytic limit is returned.
inline double circumradius_sq_delta(const CodeProfile& profile, double delta) {
  return CircumradiusEvaluator(profile).rho_sq(delta);
}

/// Circumradius of the circle through x(alpha1) and tangent to the curve at
/// x(alpha2), evaluated directly from points and the tangent vector.
inline double circumradius_tangent_point(const CodeProfile& profile, double alpha1,
                                         double alpha2) {
  const Vector p1 = evaluate_curve(profile, alpha1);
  const Vector p2 = evaluate_curve(profile, alpha2);
  const Vector t = curve_derivative(profile, alpha2, 1);
  Vector d(p1.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = p1[i] - p2[i];
  const double dd = detail::dot(d, d);
  if (dd == 0.0) throw DomainError("circumradius undefined for coincident points");
  const double proj = detail::dot(d, t) / detail::dot(t, t);
  double perp_sq = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double v = d[i] - proj * t[i];
    perp_sq += v * v;
  }
  if (perp_sq == 0.0) return std::numeric_limits<double>::infinity();
  // |d| / (2 sin theta) with sin theta = |d_perp| / |d|
  return dd / (2.0 * std::sqrt(perp_sq));
}

/// rho(Delta) on the uniform grid step, 2 step, ..., up to and including 2pi.
inline CircumradiusProfile circumradius_profile(const CodeProfile& profile,
                                                double grid_step = kDefaultGridStep) {
  if (!(grid_step > 0.0)) throw DomainError("grid step must be positive");
  CircumradiusEvaluator eval(profile);
  CircumradiusProfile out;
  out.limit_at_zero = std::sqrt(eval.limit_sq());
  const auto count = static_cast<std::size_t>(std::floor(kTwoPi / grid_step));
  out.deltas.reserve(count + 1);
  out.rho_values.reserve(count + 1);
  for (std::size_t k = 1; k <= count; ++k) {
    const double delta = static_cast<double>(k) * grid_step;
    out.deltas.push_back(delta);
    out.rho_values.push_back(std::sqrt(eval.rho_sq(delta)));
  }
  if (out.deltas.empty() || out.deltas.back() < kTwoPi) {
    out.deltas.push_back(kTwoPi);
    out.rho_values.push_back(std::sqrt(eval.rho_sq(kTwoPi)));
  }
  return out;
}

/// Tube radius: min of rho over the Delta grid and the Delta -> 0 limit,
/// then golden-section refinement inside the neighbouring grid cells.
/// Ties resolve to the smaller Delta.
inline GlobalCircumradius global_circumradius(const CodeProfile& profile,
                                              double grid_step = kDefaultGridStep) {
  if (!(grid_step > 0.0) || grid_step > 1e-3) {
    throw DomainError("grid step must lie in (0, 1e-3]");
  }
  CircumradiusEvaluator eval(profile);
  double best_delta = 0.0;
  double best_sq = eval.limit_sq();
  const auto count = static_cast<std::size_t>(std::floor(kTwoPi / grid_step));
  for (std::size_t k = 1; k <= count + 1; ++k) {
    const double delta = std::min(static_cast<double>(k) * grid_step, kTwoPi);
    const double v = eval.rho_sq(delta);
    if (v < best_sq) {
      best_sq = v;
      best_delta = delta;
    }
    if (delta >= kTwoPi) break;
  }

  const double lo = std::max(0.0, best_delta - grid_step);
  const double hi = std::min(kTwoPi, best_delta + grid_step);
  auto [refined_delta, refined_sq] = golden_section_minimize(
      [&](double d) { return eval.rho_sq(d); }, lo, hi, kRefineTolerance);
  if (refined_sq < best_sq) {
    best_sq = refined_sq;
    best_delta = refined_delta;
    // refinement collapsing onto a coincident pair is the limit itself
    if (best_delta < kLimitThreshold || kTwoPi - best_delta < kLimitThreshold) {
      best_delta = 0.0;
    }
  }
  return {std::sqrt(best_sq), best_delta};
}

/// Volume of the unit n-ball, from the even/odd closed forms.
inline double sphere_volume_coeff(int n) {
  if (n < 1) throw DomainError("ball dimension must be >= 1");
  const double pi = std::numbers::pi;
  if (n % 2 == 0) {
    double value = 1.0;
    for (int k = 1; k <= n / 2; ++k) value *= pi / k;
    return value;
  }
  // 2^((n+1)/2) pi^((n-1)/2) / n!!
  double value = 2.0;
  for (int k = 3; k <= n; k += 2) value *= 2.0 * pi / k;
  return value;
}

/// Packing density from an already computed tube radius.
inline double packing_density(const CodeProfile& profile, double rho_global) {
  const int n = profile.n;
  return path_length(profile) * sphere_volume_coeff(n - 1) * std::pow(rho_global, n - 1) /
         (sphere_volume_coeff(n) * std::pow(1.0 + rho_global, n));
}

inline double packing_density(const CodeProfile& profile) {
  return packing_density(profile, global_circumradius(profile).rho_global);
}

inline TubeMetrics tube_metrics(const CodeProfile& profile, double grid_step = kDefaultGridStep) {
  const auto g = global_circumradius(profile, grid_step);
  TubeMetrics m;
  m.rho_global = g.rho_global;
  m.argmin_delta = g.argmin_delta;
  m.path_length = path_length(profile);
  m.density = packing_density(profile, g.rho_global);
  return m;
}

/// Tube-packing objective J = L rho_G^(n-1) / (1 + rho_G)^n for a profile.
inline double packing_objective(const CodeProfile& profile, double grid_step = 1e-3) {
  const double rho = global_circumradius(profile, grid_step).rho_global;
  const int n = profile.n;
  return path_length(profile) * std::pow(rho, n - 1) / std::pow(1.0 + rho, n);
}

/// Objective over unit-norm radii with harmonic frequencies w_i = i.
inline double packing_objective(std::span<const double> radii, int n,
                                double grid_step = 1e-3) {
  if (n % 2 != 0) throw DomainError("radii-only objective requires even n");
  auto profile = CodeProfile::harmonic(n, Vector(radii.begin(), radii.end()));
  return packing_objective(profile, grid_step);
}

}  // namespace c3t
