#pragma once

#include <stdexcept>
#include <string>

namespace cyclops {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A pivot fell below the singularity threshold during factorization.
class SingularMatrixError : public Error {
public:
  using Error::Error;
};

/// An input violated a documented precondition.
class PreconditionError : public Error {
public:
  using Error::Error;
};

/// A model was evaluated outside its domain (e.g. non-positive populations).
class DomainError : public Error {
public:
  using Error::Error;
};

/// A residual or objective produced a non-finite value.
class EvaluationError : public Error {
public:
  EvaluationError(const std::string& what, int component)
      : Error(what), component_(component) {}
  int component() const { return component_; }

private:
  int component_ = -1;
};

/// Newton iteration ran out of iterations.
class NonConvergenceError : public Error {
public:
  NonConvergenceError(const std::string& what, double final_residual_norm)
      : Error(what), final_norm_(final_residual_norm) {}
  double final_residual_norm() const { return final_norm_; }

private:
  double final_norm_;
};

/// The state became non-finite while integrating.
class SimulationError : public Error {
public:
  SimulationError(const std::string& what, int step)
      : Error(what), step_(step) {}
  int step() const { return step_; }

private:
  int step_ = -1;
};

/// No section crossing was found within the allotted horizon.
class DetectionError : public Error {
public:
  using Error::Error;
};

/// A cycle solve converged, but to a cycle other than the intended one
/// (duration outside the guard interval, or extra section crossings).
class WrongCycleError : public Error {
public:
  using Error::Error;
};

/// Config file failed schema validation.
class ConfigError : public Error {
public:
  using Error::Error;
};

}  // namespace cyclops
