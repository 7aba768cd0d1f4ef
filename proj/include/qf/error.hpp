#pragma once

#include <stdexcept>
#include <string>

namespace qf {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or arguments supplied by the caller.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Mismatched dimensions or vocabularies.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A numeric quantity became NaN or infinite during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace qf
