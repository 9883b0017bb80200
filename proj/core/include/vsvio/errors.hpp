#pragma once

#include <stdexcept>
#include <string>

namespace vsvio {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes that do not agree for an operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Input outside the mathematical domain of an operation (log of a
/// non-positive entry, division by zero, gimbal-lock orientation, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Misuse of the autodiff graph: non-scalar root, freed graph.
class GraphError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values or infeasible simulation schedules.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed, truncated or tampered file content.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf produced while training.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int epoch, int step)
      : Error(what), epoch_(epoch), step_(step) {}
  int epoch() const noexcept { return epoch_; }
  int step() const noexcept { return step_; }

 private:
  int epoch_;
  int step_;
};

}  // namespace vsvio
