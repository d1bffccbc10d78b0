#pragma once

#include <cmath>
#include <utility>

namespace c3t {

/// Golden-section search for the minimum of a unimodal function on [lo, hi].
/// Returns (argmin, value).
template <typename F>
std::pair<double, double> golden_section_minimize(F&& f, double lo, double hi, double tol) {
  constexpr double kInvPhi = 0.6180339887498949;
  double a = lo;
  double b = hi;
  double x1 = b - kInvPhi * (b - a);
  double x2 = a + kInvPhi * (b - a);
  double f1 = f(x1);
  double f2 = f(x2);
  while (b - a > tol) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kInvPhi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kInvPhi * (b - a);
      f2 = f(x2);
    }
  }
  return f1 <= f2 ? std::pair{x1, f1} : std::pair{x2, f2};
}

template <typename F>
std::pair<double, double> golden_section_maximize(F&& f, double lo, double hi, double tol) {
  auto [x, v] = golden_section_minimize([&](double t) { return -f(t); }, lo, hi, tol);
  return {x, -v};
}

}  // namespace c3t
