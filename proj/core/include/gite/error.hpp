#pragma once

#include <stdexcept>
#include <string>

namespace gite {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor extents; the message names the operation and shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf produced where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// API misuse, such as a second backward sweep over one tape.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input files. Messages carry file and line.
class IngestError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration key, value or combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace gite
