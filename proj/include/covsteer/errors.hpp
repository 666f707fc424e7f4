#pragma once

#include <stdexcept>
#include <string>

namespace covsteer {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// The adaptive step controller could not make progress.
class IntegrationError : public Error {
 public:
  using Error::Error;
};

class SingularMatrixError : public Error {
 public:
  using Error::Error;
};

/// The Riccati solution does not exist on the requested span.
class NonexistenceError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class NotControllableError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

class ChannelMismatchError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class NoConvergenceError : public Error {
 public:
  NoConvergenceError(const std::string& what, double best_residual)
      : Error(what), best_residual_(best_residual) {}
  double best_residual() const noexcept { return best_residual_; }

 private:
  double best_residual_;
};

class InconsistencyError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

class StepSizeError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

class MissingCheckpointError : public Error {
 public:
  using Error::Error;
};

class PathsNotRetainedError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace covsteer
