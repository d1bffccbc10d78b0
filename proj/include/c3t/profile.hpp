#pragma once

#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "c3t/errors.hpp"

namespace c3t {

using Vector = std::vector<double>;

/// How a source symbol s in [-1, 1] is mapped onto the curve parameter.
enum class Stretch {
  FullCircle,    ///< alpha = pi * s
  AliasingSafe,  ///< alpha = 2 pi s / n, keeps every harmonic phase inside (-pi, pi]
};

inline constexpr double kNormTolerance = 1e-12;

/// Complete parameterization of one constant curvature curve code.
///
/// Even n: a torus geodesic with n/2 (cos, sin) pairs. Odd n: the same pairs
/// plus a linear last coordinate b * alpha (a generalized helix).
struct CodeProfile {
  int n = 0;
  Vector radii;
  std::vector<int> frequencies;
  double helix_coeff = 0.0;
  Stretch stretch = Stretch::FullCircle;

  /// Number of (cos, sin) coordinate pairs.
  int pairs() const noexcept { return n / 2; }
  bool odd() const noexcept { return n % 2 == 1; }

  /// Harmonic profile with frequencies 1..m. Radii are used as given.
  static CodeProfile harmonic(int n, Vector radii, double b = 0.0,
                              Stretch stretch = Stretch::FullCircle) {
    CodeProfile p;
    p.n = n;
    p.radii = std::move(radii);
    p.frequencies.resize(p.radii.size());
    for (std::size_t i = 0; i < p.frequencies.size(); ++i) {
      p.frequencies[i] = static_cast<int>(i) + 1;
    }
    p.helix_coeff = b;
    p.stretch = stretch;
    return p;
  }

  /// Sum of r_i^2 (+ pi^2 b^2 for odd n); the squared power-sphere radius.
  double power_norm_sq() const noexcept {
    double acc = 0.0;
    for (double r : radii) acc += r * r;
    if (odd()) acc += std::numbers::pi * std::numbers::pi * helix_coeff * helix_coeff;
    return acc;
  }

  /// Rescales radii (and b) so the power constraint holds with equality.
  CodeProfile normalized() const {
    CodeProfile p = *this;
    const double norm = std::sqrt(power_norm_sq());
    if (!(norm > 0.0)) throw ValidationError("cannot normalize a zero profile");
    for (double& r : p.radii) r /= norm;
    p.helix_coeff /= norm;
    return p;
  }

  /// Throws ValidationError when the profile is unusable.
  void validate() const {
    if (n < 2) throw ValidationError("dimension n must be >= 2, got " + std::to_string(n));
    const auto m = static_cast<std::size_t>(pairs());
    if (radii.size() != m) {
      throw ValidationError("expected " + std::to_string(m) + " radii for n=" +
                            std::to_string(n) + ", got " + std::to_string(radii.size()));
    }
    if (frequencies.size() != m) {
      throw ValidationError("expected " + std::to_string(m) + " frequencies, got " +
                            std::to_string(frequencies.size()));
    }
    for (double r : radii) {
      if (!std::isfinite(r) || r <= 0.0) {
        throw ValidationError("radius must be finite and > 0 for full dimensionality");
      }
    }
    std::set<int> seen;
    for (int w : frequencies) {
      if (w <= 0) throw ValidationError("frequencies must be positive integers");
      if (!seen.insert(w).second) {
        throw ValidationError("frequencies must be distinct (curve is not twisted)");
      }
    }
    if (odd()) {
      if (!std::isfinite(helix_coeff) || helix_coeff < 0.0) {
        throw ValidationError("helix coefficient b must be finite and >= 0");
      }
      if (power_norm_sq() > 1.0 + kNormTolerance) {
        throw ValidationError("odd-n profile violates sum r^2 + pi^2 b^2 <= 1");
      }
    } else {
      if (helix_coeff != 0.0) throw ValidationError("helix coefficient only applies to odd n");
      if (std::abs(power_norm_sq() - 1.0) > kNormTolerance) {
        throw ValidationError("even-n profile must satisfy sum r^2 = 1");
      }
    }
  }

  /// Non-fatal observations, e.g. a planar odd-n profile with b = 0.
  std::vector<std::string> warnings() const {
    std::vector<std::string> out;
    if (odd() && helix_coeff == 0.0) {
      out.emplace_back("odd-n profile with b = 0 is planar in the last coordinate; "
                       "the frame degenerates at order n");
    }
    return out;
  }

  bool operator==(const CodeProfile&) const = default;
};

inline std::string to_string(Stretch s) {
  return s == Stretch::FullCircle ? "full" : "aliasing_safe";
}

inline Stretch stretch_from_string(const std::string& s) {
  if (s == "full") return Stretch::FullCircle;
  if (s == "aliasing_safe") return Stretch::AliasingSafe;
  throw ValidationError("unknown stretch mode '" + s + "' (expected full|aliasing_safe)");
}

inline void to_json(nlohmann::json& j, const CodeProfile& p) {
  j = nlohmann::json{{"n", p.n},
                     {"radii", p.radii},
                     {"frequencies", p.frequencies},
                     {"stretch", to_string(p.stretch)}};
  if (p.odd()) j["b"] = p.helix_coeff;
}

inline void from_json(const nlohmann::json& j, CodeProfile& p) {
  try {
    p.n = j.at("n").get<int>();
    p.radii = j.at("radii").get<Vector>();
    if (j.contains("frequencies")) {
      p.frequencies = j.at("frequencies").get<std::vector<int>>();
    } else {
      p.frequencies.resize(p.radii.size());
      for (std::size_t i = 0; i < p.radii.size(); ++i) p.frequencies[i] = static_cast<int>(i) + 1;
    }
    p.helix_coeff = j.contains("b") ? j.at("b").get<double>() : 0.0;
    p.stretch = j.contains("stretch") ? stretch_from_string(j.at("stretch").get<std::string>())
                                      : Stretch::FullCircle;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed code profile: ") + e.what());
  }
}

/// Reads and validates a profile document. With `normalize`, radii are first
/// rescaled onto the power sphere (useful for hand-written, rounded radii).
inline CodeProfile load_profile(const std::string& path, bool normalize = false) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open profile file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("profile " + path + " is not valid JSON: " + e.what());
  }
  auto p = j.get<CodeProfile>();
  if (normalize) p = p.normalized();
  p.validate();
  return p;
}

inline void save_profile(const CodeProfile& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write profile file " + path);
  out << nlohmann::json(p).dump(2) << '\n';
}

}  // namespace c3t
