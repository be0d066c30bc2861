#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mfgq {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad scenario / grid / solver configuration, detected before any work runs.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Model parameter with an inadmissible value; message names the field.
class ValidationError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Precondition violation on an otherwise valid configuration.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Non-finite or out-of-bounds intermediate inside a numerical sweep.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Fixed-point loop exhausted its iteration budget; carries the residuals seen.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> residuals)
      : Error(what), residuals_(std::move(residuals)) {}

  const std::vector<double>& residual_history() const { return residuals_; }

 private:
  std::vector<double> residuals_;
};

}  // namespace mfgq
