#pragma once

#include <stdexcept>
#include <string>

namespace hsc {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of an operation
/// (negative population, y outside (0, beta0], malformed grid, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The model's standing hypotheses exclude the requested computation.
/// The CLI maps this family to exit code 2.
class HypothesisError : public Error {
 public:
  using Error::Error;
};

/// H1 fails: the difference operator is not a contraction.
class ContractionError : public HypothesisError {
 public:
  using HypothesisError::HypothesisError;
};

/// No nontrivial equilibrium exists (H1, H2 or H3 fails for constant data).
class NoEquilibriumError : public HypothesisError {
 public:
  using HypothesisError::HypothesisError;
};

/// Operation only defined for constant (autonomous) coefficients.
class UnsupportedModeError : public HypothesisError {
 public:
  using HypothesisError::HypothesisError;
};

/// The a-priori box search ran out of halvings/doublings; the hypotheses
/// hold only marginally (or not at all).
class InfeasibleError : public HypothesisError {
 public:
  using HypothesisError::HypothesisError;
};

/// A numerical procedure failed to converge or ran out of budget.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double final_residual = -1.0)
      : Error(what), residual_(final_residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// A discretization produced a state that violates its invariants
/// (negativity, blow-up, mass leak).
class SchemeError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration. The CLI maps this to exit code 64.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace hsc
