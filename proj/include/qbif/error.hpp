#pragma once

#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>

namespace qbif {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter or argument violates a documented precondition.
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed to reach its tolerance. Carries the achieved
/// residual so callers can report it.
class NumericalFailure : public Error {
 public:
  explicit NumericalFailure(const std::string& what)
      : Error(what), achieved_(std::numeric_limits<double>::quiet_NaN()) {}
  NumericalFailure(const std::string& what, double achieved) : Error(what + format(achieved)), achieved_(achieved) {}
  [[nodiscard]] double achieved() const noexcept { return achieved_; }

 private:
  static std::string format(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, " (achieved %.3g)", v);
    return buf;
  }
  double achieved_;
};

/// A computed object violates a physical invariant (trace, positivity, ...).
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// Bloch-sphere equations evaluated too close to a pole.
class SingularityError : public Error {
 public:
  using Error::Error;
};

}  // namespace qbif
