#pragma once

#include <stdexcept>
#include <string>

namespace sgldreg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand extents do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// NaN or infinity where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Caller violated an API precondition (e.g. backward on a non-scalar).
class ContractError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or truncated file.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Snapshots incompatible with each other or with a network configuration.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, long long iteration)
      : Error(what + " at iteration " + std::to_string(iteration)), iteration_(iteration) {}
  long long iteration() const noexcept { return iteration_; }

 private:
  long long iteration_;
};

}  // namespace sgldreg
