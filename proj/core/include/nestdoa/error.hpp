#pragma once

#include <stdexcept>
#include <string>

namespace nestdoa {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad array, grid or solver configuration (zero-sized arrays, empty grids, ...).
class InvalidConfiguration : public Error {
 public:
  using Error::Error;
};

/// Angle outside [-90, 90] degrees.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data: dimension mismatch, no snapshots, non-finite values.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Factorization failure or loss of positive definiteness.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what, int iteration = -1)
      : Error(iteration < 0 ? what : what + " (outer iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}

  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

}  // namespace nestdoa
