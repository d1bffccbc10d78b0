#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "c3t/errors.hpp"
#include "c3t/profile.hpp"

namespace c3t {

/// Orthonormal vectors e_1..e_m at one curve parameter.
struct FrenetFrame {
  double alpha = 0.0;
  std::vector<Vector> vectors;
};

/// Generalized curvatures chi_1..chi_{n-1}.
struct CurvatureVector {
  Vector values;
};

inline constexpr double kFrameStep = 1e-5;

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double int_pow(double base, int k) {
  double out = 1.0;
  for (int i = 0; i < k; ++i) out *= base;
  return out;
}

}  // namespace detail

/// Point x(alpha) on the encoder curve.
inline Vector evaluate_curve(const CodeProfile& profile, double alpha) {
  profile.validate();
  Vector x(static_cast<std::size_t>(profile.n));
  for (int i = 0; i < profile.pairs(); ++i) {
    const double phase = profile.frequencies[i] * alpha;
    x[2 * i] = profile.radii[i] * std::cos(phase);
    x[2 * i + 1] = profile.radii[i] * std::sin(phase);
  }
  if (profile.odd()) x.back() = profile.helix_coeff * alpha;
  return x;
}

/// k-th derivative of the curve from the closed phase-shift form
/// r w^k cos(w alpha + k pi / 2). The quarter-turn shift is applied exactly.
inline Vector curve_derivative(const CodeProfile& profile, double alpha, int k) {
  profile.validate();
  if (k < 0) throw DomainError("derivative order must be >= 0");
  Vector d(static_cast<std::size_t>(profile.n), 0.0);
  for (int i = 0; i < profile.pairs(); ++i) {
    const double w = profile.frequencies[i];
    const double scale = profile.radii[i] * detail::int_pow(w, k);
    const double c = std::cos(w * alpha);
    const double s = std::sin(w * alpha);
    double dc = 0.0;
    double ds = 0.0;
    switch (k % 4) {
      case 0: dc = c; ds = s; break;
      case 1: dc = -s; ds = c; break;
      case 2: dc = -c; ds = -s; break;
      default: dc = s; ds = -c; break;
    }
    d[2 * i] = scale * dc;
    d[2 * i + 1] = scale * ds;
  }
  if (profile.odd()) {
    d.back() = k == 0 ? profile.helix_coeff * alpha : (k == 1 ? profile.helix_coeff : 0.0);
  }
  return d;
}

/// Curve speed |x'(alpha)|, constant in alpha.
inline double curve_speed(const CodeProfile& profile) {
  double acc = 0.0;
  for (int i = 0; i < profile.pairs(); ++i) {
    const double rw = profile.radii[i] * profile.frequencies[i];
    acc += rw * rw;
  }
  if (profile.odd()) acc += profile.helix_coeff * profile.helix_coeff;
  return std::sqrt(acc);
}

/// Frenet frame by Gram-Schmidt on x', x'', ..., x^(m).
///
/// Each vector is orthogonalized twice against its predecessors; a residual
/// below 1e-12 relative to |x^(k)| is reported as a degenerate order k.
inline FrenetFrame frenet_frame(const CodeProfile& profile, double alpha, int m) {
  profile.validate();
  if (m < 1 || m > profile.n) {
    throw DomainError("frame size must lie in [1, n], got " + std::to_string(m));
  }
  FrenetFrame frame;
  frame.alpha = alpha;
  frame.vectors.reserve(static_cast<std::size_t>(m));
  for (int k = 1; k <= m; ++k) {
    Vector e = curve_derivative(profile, alpha, k);
    const double scale = std::max(1.0, detail::norm(e));
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& prev : frame.vectors) {
        const double proj = detail::dot(e, prev);
        for (std::size_t c = 0; c < e.size(); ++c) e[c] -= proj * prev[c];
      }
    }
    const double len = detail::norm(e);
    if (len < 1e-12 * scale) {
      throw DegenerateCurveError(
          k, "derivatives are linearly dependent at order k=" + std::to_string(k));
    }
    for (double& v : e) v /= len;
    frame.vectors.push_back(std::move(e));
  }
  return frame;
}

/// chi_m = <e_m', e_{m+1}> / |x'| with e_m' from central differences of the frame.
inline CurvatureVector generalized_curvatures(const CodeProfile& profile, double alpha,
                                              double step = kFrameStep) {
  const int n = profile.n;
  const auto here = frenet_frame(profile, alpha, n);
  const auto ahead = frenet_frame(profile, alpha + step, n);
  const auto behind = frenet_frame(profile, alpha - step, n);
  const double speed = curve_speed(profile);

  CurvatureVector out;
  out.values.resize(static_cast<std::size_t>(n - 1));
  for (int mi = 0; mi + 1 < n; ++mi) {
    const auto& fwd = ahead.vectors[mi];
    const auto& bwd = behind.vectors[mi];
    const auto& next = here.vectors[mi + 1];
    double acc = 0.0;
    for (int c = 0; c < n; ++c) acc += (fwd[c] - bwd[c]) * next[c];
    out.values[mi] = acc / (2.0 * step) / speed;
  }
  return out;
}

/// First curvature in closed form: |x''| / |x'|^2 (x' and x'' are orthogonal).
inline double first_curvature(const CodeProfile& profile) {
  double b = 0.0;
  for (int i = 0; i < profile.pairs(); ++i) {
    const double w2 = static_cast<double>(profile.frequencies[i]) * profile.frequencies[i];
    b += profile.radii[i] * profile.radii[i] * w2 * w2;
  }
  const double speed = curve_speed(profile);
  return std::sqrt(b) / (speed * speed);
}

/// Arc length over alpha in [-pi, pi].
inline double path_length(const CodeProfile& profile) {
  profile.validate();
  return 2.0 * std::numbers::pi * curve_speed(profile);
}

}  // namespace c3t
