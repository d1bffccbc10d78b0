#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "c3t/errors.hpp"
#include "c3t/profile.hpp"
#include "c3t/rng.hpp"
#include "c3t/tube.hpp"

namespace c3t {

/// Gain sequences a_k = a0 / (k + 1 + A)^alpha_exp and c_k = c0 / (k + 1)^gamma_exp.
struct SpsaConfig {
  double a0 = 0.01;
  double A = 10.0;
  double alpha_exp = 0.602;
  double c0 = 0.01;
  double gamma_exp = 0.101;
  /// Stop once consecutive objective values differ by less than this.
  double tolerance = 1e-3;
  int max_iters = 1000;
  /// Iterations before the tolerance test is consulted.
  int min_iters = 0;
  /// When > 0, a0 is rescaled so the first step moves the largest coordinate
  /// by about this much, using the mean |g| over `calibration_samples` draws.
  double initial_step = 0.0;
  int calibration_samples = 8;
  /// Radii below this are clamped before re-projection.
  double min_radius = 1e-6;
  /// Delta grid for the tube radius inside the objective.
  double grid_step = 1e-3;
  std::uint64_t seed = 0;

  double gain_a(int k) const { return a0 / std::pow(k + 1.0 + A, alpha_exp); }
  double gain_c(int k) const { return c0 / std::pow(k + 1.0, gamma_exp); }

  void validate() const {
    if (!(a0 > 0.0) || !(c0 > 0.0)) throw ValidationError("SPSA gains must be positive");
    if (!(A >= 0.0) || !(alpha_exp > 0.0) || !(gamma_exp > 0.0)) {
      throw ValidationError("SPSA gain exponents must be positive and A >= 0");
    }
    if (!(tolerance > 0.0)) throw ValidationError("SPSA tolerance must be > 0");
    if (max_iters < 1) throw ValidationError("SPSA max_iters must be >= 1");
    if (!(min_radius > 0.0)) throw ValidationError("min_radius must be > 0");
  }

  /// Gains that reproduce the optimized table entries in a few hundred
  /// iterations: default schedule shapes with a calibrated first step.
  static SpsaConfig table_reproduction() {
    SpsaConfig c;
    c.initial_step = 0.02;
    c.max_iters = 800;
    c.min_iters = 200;
    c.tolerance = 1e-10;
    return c;
  }
};

enum class TerminationReason { Tolerance, MaxIters };

inline std::string to_string(TerminationReason r) {
  return r == TerminationReason::Tolerance ? "tolerance" : "max_iters";
}

struct SpsaIterate {
  int k = 0;
  Vector point;
  double objective = 0.0;
};

struct OptimizationTrace {
  std::vector<SpsaIterate> iterates;
  TerminationReason terminated_reason = TerminationReason::MaxIters;
  double calibrated_a0 = 0.0;

  const SpsaIterate& best() const {
    return *std::max_element(iterates.begin(), iterates.end(),
                             [](const auto& a, const auto& b) { return a.objective < b.objective; });
  }
};

/// Two-measurement simultaneous perturbation gradient estimate.
template <typename Objective>
Vector spsa_gradient_estimate(Objective&& objective, std::span<const double> point, double c_k,
                              std::span<const double> perturbation) {
  if (perturbation.size() != point.size()) {
    throw DomainError("perturbation and point sizes differ");
  }
  for (double d : perturbation) {
    if (d != 1.0 && d != -1.0) throw DomainError("perturbation entries must be +1 or -1");
  }
  Vector plus(point.begin(), point.end());
  Vector minus(point.begin(), point.end());
  for (std::size_t j = 0; j < plus.size(); ++j) {
    plus[j] += c_k * perturbation[j];
    minus[j] -= c_k * perturbation[j];
  }
  const double diff = objective(std::as_const(plus)) - objective(std::as_const(minus));
  Vector g(point.size());
  for (std::size_t j = 0; j < g.size(); ++j) g[j] = diff / (2.0 * c_k * perturbation[j]);
  return g;
}

namespace detail {

template <typename Gen>
Vector rademacher(std::size_t dim, Gen& gen) {
  Vector d(dim);
  for (auto& v : d) v = (gen() & 1U) ? 1.0 : -1.0;
  return d;
}

}  // namespace detail

/// Projected SPSA ascent: x <- project(x + a_k g_k). The objective is called
/// on raw perturbed points; `project` maps any point back to the feasible set.
template <typename Objective, typename Project>
OptimizationTrace spsa_maximize(Objective&& objective, Project&& project, Vector start,
                                const SpsaConfig& config) {
  config.validate();
  std::mt19937_64 gen(config.seed);
  Vector x = project(std::move(start));

  auto eval = [&](const Vector& p, int k) {
    try {
      return objective(p);
    } catch (const std::exception& e) {
      throw std::runtime_error("SPSA objective failed at iterate k=" + std::to_string(k) + ": " +
                               e.what());
    }
  };

  OptimizationTrace trace;
  double a0 = config.a0;
  if (config.initial_step > 0.0) {
    double mean_mag = 0.0;
    for (int s = 0; s < config.calibration_samples; ++s) {
      const Vector d = detail::rademacher(x.size(), gen);
      const Vector g = spsa_gradient_estimate([&](const Vector& p) { return eval(p, 0); }, x,
                                              config.c0, d);
      double mag = 0.0;
      for (double v : g) mag = std::max(mag, std::abs(v));
      mean_mag += mag / config.calibration_samples;
    }
    if (mean_mag > 0.0) a0 = config.initial_step * std::pow(config.A + 1.0, config.alpha_exp) / mean_mag;
  }
  trace.calibrated_a0 = a0;

  double current = eval(x, 0);
  trace.iterates.push_back({0, x, current});
  trace.terminated_reason = TerminationReason::MaxIters;

  for (int k = 0; k < config.max_iters; ++k) {
    const double a_k = a0 / std::pow(k + 1.0 + config.A, config.alpha_exp);
    const double c_k = config.gain_c(k);
    const Vector d = detail::rademacher(x.size(), gen);
    const Vector g = spsa_gradient_estimate([&](const Vector& p) { return eval(p, k); }, x, c_k, d);
    for (std::size_t j = 0; j < x.size(); ++j) x[j] += a_k * g[j];
    x = project(std::move(x));
    const double next = eval(x, k + 1);
    trace.iterates.push_back({k + 1, x, next});
    if (k + 1 >= config.min_iters && std::abs(next - current) < config.tolerance) {
      trace.terminated_reason = TerminationReason::Tolerance;
      break;
    }
    current = next;
  }
  return trace;
}

/// Feasible set for radii (even n) or radii followed by b (odd n).
/// Even: clamp, then unit norm. Odd: clamp, then shrink into sum r^2 + pi^2 b^2 <= 1.
inline Vector project_parameters(Vector x, int n, double min_radius) {
  const bool odd = n % 2 == 1;
  const std::size_t m = static_cast<std::size_t>(n / 2);
  for (std::size_t i = 0; i < m; ++i) x[i] = std::max(x[i], min_radius);
  if (!odd) {
    double norm = 0.0;
    for (double v : x) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : x) v /= norm;
    return x;
  }
  x[m] = std::max(x[m], 0.0);
  double power = x[m] * x[m] * std::numbers::pi * std::numbers::pi;
  for (std::size_t i = 0; i < m; ++i) power += x[i] * x[i];
  if (power > 1.0) {
    const double s = 1.0 / std::sqrt(power);
    for (double& v : x) v *= s;
  }
  return x;
}

inline CodeProfile profile_from_parameters(const Vector& x, int n,
                                           Stretch stretch = Stretch::FullCircle) {
  const std::size_t m = static_cast<std::size_t>(n / 2);
  Vector radii(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(m));
  return CodeProfile::harmonic(n, std::move(radii), n % 2 == 1 ? x[m] : 0.0, stretch);
}

/// Symmetric starting point: r_i = sqrt(2/n); odd n gives the helix the remaining 1/n.
inline Vector initial_parameters(int n) {
  const std::size_t m = static_cast<std::size_t>(n / 2);
  Vector x(m, std::sqrt(2.0 / n));
  if (n % 2 == 1) x.push_back(1.0 / (std::numbers::pi * std::sqrt(static_cast<double>(n))));
  return x;
}

struct OptimizationResult {
  CodeProfile profile;
  OptimizationTrace trace;
  double objective = 0.0;
};

/// Maximizes the tube-packing objective over the power sphere; returns the
/// best iterate of the trace, not the last one.
inline OptimizationResult optimize_radii(int n, const SpsaConfig& config,
                                         std::optional<Vector> start = std::nullopt) {
  if (n < 3) throw DomainError("radius optimization needs n >= 3");
  const auto project = [&](Vector x) { return project_parameters(std::move(x), n, config.min_radius); };
  const auto objective = [&](const Vector& x) {
    // The objective is defined on the feasible set; perturbed points are projected first.
    auto profile = profile_from_parameters(project(x), n);
    if (!profile.odd()) profile = profile.normalized();
    return packing_objective(profile, config.grid_step);
  };
  auto trace = spsa_maximize(objective, project, start.value_or(initial_parameters(n)), config);
  const auto& best = trace.best();
  OptimizationResult result;
  result.profile = profile_from_parameters(best.point, n);
  if (!result.profile.odd()) result.profile = result.profile.normalized();
  result.objective = best.objective;
  result.trace = std::move(trace);
  return result;
}

/// Independent seeded runs; keeps the highest objective. Seeds are derived from
/// config.seed and the run index.
inline OptimizationResult optimize_radii_multistart(int n, const SpsaConfig& config, int runs) {
  if (runs < 1) throw DomainError("need at least one SPSA run");
  std::optional<OptimizationResult> best;
  for (int s = 0; s < runs; ++s) {
    SpsaConfig c = config;
    c.seed = derive_seed(config.seed, {static_cast<std::uint64_t>(s)});
    auto r = optimize_radii(n, c);
    if (!best || r.objective > best->objective) best = std::move(r);
  }
  return std::move(*best);
}

}  // namespace c3t
