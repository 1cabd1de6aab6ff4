#pragma once

#include <stdexcept>
#include <string>

namespace fleetcm {

// Base of every library error. The message is prefixed with the module
// that raised it, e.g. "training: non-finite loss at epoch 3, batch 17".
class Error : public std::runtime_error {
 public:
  Error(const std::string& module, const std::string& what)
      : std::runtime_error(module + ": " + what), module_(module) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

// Invalid configuration, architecture mismatch, bad CLI arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or missing input data.
class DataError : public Error {
 public:
  using Error::Error;
};

// Required column absent from an input file.
class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

// Vector/matrix dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of a function (sigma <= 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced during computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace fleetcm
