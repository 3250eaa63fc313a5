#pragma once

#include <stdexcept>
#include <string>

namespace jointcr {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input: bad CSV cells, unknown columns, bad config.
class DataError : public Error {
 public:
  using Error::Error;
};

// File could not be opened or written.
class IoError : public Error {
 public:
  using Error::Error;
};

// Numerical failure during estimation (singular systems, non-convergence).
class NumericError : public Error {
 public:
  using Error::Error;
};

// An exponent exceeded the overflow guard. Carries the offending exponent so
// callers doing step control can back off instead of aborting.
class OverflowError : public NumericError {
 public:
  explicit OverflowError(double exponent)
      : NumericError("exponent overflow: exp(" + std::to_string(exponent) + ")"),
        exponent_(exponent) {}
  double exponent() const noexcept { return exponent_; }

 private:
  double exponent_;
};

// Largest exponent passed to std::exp before OverflowError is raised.
inline constexpr double kMaxExponent = 700.0;

}  // namespace jointcr
