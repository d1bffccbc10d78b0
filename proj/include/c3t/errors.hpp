#pragma once

#include <stdexcept>
#include <string>

namespace c3t {

/// Profile parameters violate the curve constraints (radii, frequencies, power).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An argument lies outside the domain of the operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Gram-Schmidt ran into linearly dependent derivatives.
class DegenerateCurveError : public std::runtime_error {
 public:
  DegenerateCurveError(int order, const std::string& what)
      : std::runtime_error(what), order_(order) {}

  int order() const noexcept { return order_; }

 private:
  int order_;
};

/// Circumradius denominator vanished away from the coincident-point limit.
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Network training diverged or was misconfigured.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace c3t
