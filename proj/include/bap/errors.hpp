#ifndef BAP_ERRORS_HPP
#define BAP_ERRORS_HPP

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace bap {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition (bad multiplier sign, empty
// input, invalid schedule, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Vectors/matrices of incompatible sizes were combined.
class DimensionMismatch : public ContractViolation {
 public:
  using ContractViolation::ContractViolation;
};

// The constraint system has no feasible point (detected via an unbounded
// dual / Farkas certificate).
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// An iterative routine hit its cap without meeting its tolerance.  Carries
// the best iterate found so the caller can inspect how close it got.
class NumericalFailure : public Error {
 public:
  NumericalFailure(const std::string& what, Eigen::VectorXd best)
      : Error(what), best_iterate(std::move(best)) {}
  Eigen::VectorXd best_iterate;
};

// The requested quantity is undefined for this input (e.g. dual value
// without a known projection).
class UnsupportedQuery : public Error {
 public:
  using Error::Error;
};

// Problem size exceeds what a deliberately-simple routine enumerates.
class UnsupportedScale : public Error {
 public:
  using Error::Error;
};

// An internal invariant failed mid-run; indicates a bug, not bad input.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents; message carries the location.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Instance generation could not produce a verified instance.
class GenerationError : public Error {
 public:
  using Error::Error;
};

}  // namespace bap

#endif  // BAP_ERRORS_HPP
