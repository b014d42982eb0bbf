#pragma once

#include <stdexcept>
#include <string>

namespace iadcps {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration or arguments (CLI exit code 1).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data (CLI exit code 2).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or a failed numerical routine (CLI exit code 3).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace iadcps
