#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "c3t/errors.hpp"

namespace c3t {

/// Scaled complementary error function exp(x^2) erfc(x).
///
/// Direct product for moderate arguments, the asymptotic series past 10
/// (where exp(x^2) would lose relative accuracy), reflection for x < 0.
inline double erfcx(double x) {
  if (x < 0.0) {
    // erfc(-u) = 2 - erfc(u)
    if (x * x > 700.0) return std::numeric_limits<double>::infinity();
    return 2.0 * std::exp(x * x) - erfcx(-x);
  }
  if (x < 10.0) return std::exp(x * x) * std::erfc(x);
  const double inv2x2 = 1.0 / (2.0 * x * x);
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k <= 20; ++k) {
    term *= -(2.0 * k - 1.0) * inv2x2;
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return sum / (x * std::sqrt(std::numbers::pi));
}

/// Gaussian right-tail probability Q(x).
inline double gaussian_q(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

/// Q^{-1}(eps) by bisection on Q; |Q(x) - eps| / eps ends near machine precision.
inline double gaussian_q_inverse(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) {
    throw DomainError("Q^{-1} requires eps in (0, 1), got " + std::to_string(eps));
  }
  double lo = -40.0;
  double hi = 40.0;
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    // Q is decreasing
    if (gaussian_q(mid) > eps) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace c3t
