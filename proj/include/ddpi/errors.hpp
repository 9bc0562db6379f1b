#pragma once

#include <stdexcept>
#include <string>

namespace ddpi {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes do not line up (bad reshape, mismatched operands).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition was violated (asymmetric input, negative bound, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain where a formula is defined (t = 0, K̄ >= 1, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Linear system too ill-conditioned to solve.
class SingularMatrixError : public Error {
 public:
  SingularMatrixError(const std::string& what, double condition)
      : Error(what), condition_(condition) {}
  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

/// An iterative numerical routine failed to converge.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, int iterations)
      : Error(what), iterations_(iterations) {}
  int iterations() const noexcept { return iterations_; }

 private:
  int iterations_;
};

/// Gain does not make the closed loop Schur stable.
class StabilizationError : public Error {
 public:
  StabilizationError(const std::string& what, double spectral_radius)
      : Error(what), spectral_radius_(spectral_radius) {}
  double spectral_radius() const noexcept { return spectral_radius_; }

 private:
  double spectral_radius_;
};

/// Riccati iteration did not converge; the pair is treated as non-stabilizable.
class NotStabilizableError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Invalid run or experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Closed-loop state exceeded the divergence cap.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int step, double state_norm)
      : Error(what), step_(step), state_norm_(state_norm) {}
  int step() const noexcept { return step_; }
  double state_norm() const noexcept { return state_norm_; }

 private:
  int step_;
  double state_norm_;
};

}  // namespace ddpi
