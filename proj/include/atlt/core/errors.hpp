#pragma once

#include <stdexcept>
#include <string>

namespace atlt {

// Base for all library errors. The CLI maps the subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes incompatible with an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or argument values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed, truncated or inconsistent data files and datasets.
class DataError : public Error {
 public:
  using Error::Error;
};

// NaN or infinity reached the loss or the gradients during training.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

}  // namespace atlt
