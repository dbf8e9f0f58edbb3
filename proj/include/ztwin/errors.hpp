#pragma once

#include <stdexcept>
#include <string>

namespace ztwin {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad config file, missing keys, inconsistent run parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Invalid numeric input: wrong dimensions, non-finite values, violated preconditions.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Regression / CPT estimation cannot proceed (underdetermined system, no data).
class EstimationError : public Error {
 public:
  using Error::Error;
};

// Queue utilization at or above 1 on a strict evaluation path.
class InstabilityError : public Error {
 public:
  using Error::Error;
};

// Bayesian network query failure (zero-probability evidence, incomplete assignment).
class InferenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace ztwin
