#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pint {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments or configuration rejected before any computation.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A zero (or numerically negligible) pivot met during factorization.
class SingularMatrixError : public Error {
 public:
  explicit SingularMatrixError(std::size_t pivot)
      : Error("singular matrix: zero pivot at index " + std::to_string(pivot)),
        pivot_(pivot) {}

  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

/// Nonlinear iteration failed to reach its tolerance.
class NewtonFailure : public Error {
 public:
  NewtonFailure(int iterations, double residual)
      : Error("Newton iteration did not converge after " +
              std::to_string(iterations) + " iterations (relative residual " +
              std::to_string(residual) + ")"),
        iterations_(iterations),
        residual_(residual) {}

  int iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  int iterations_;
  double residual_;
};

/// A propagator application failed; carries where in space-time it happened.
class StepFailure : public Error {
 public:
  StepFailure(std::size_t level, std::size_t index, const std::string& what)
      : Error("time step failed on level " + std::to_string(level) +
              " at point " + std::to_string(index) + ": " + what),
        level_(level),
        index_(index) {}

  std::size_t level() const noexcept { return level_; }
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t level_;
  std::size_t index_;
};

}  // namespace pint
