#pragma once

#include <stdexcept>
#include <string>

namespace fraclat {

/// Base class for all library-specific failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad or unknown configuration input. The CLI maps this to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed (non-finite value, solver stall, ...).
/// The CLI maps this to exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A requested object would exceed a configured size cap.
class CapacityError : public Error {
 public:
  using Error::Error;
};

}  // namespace fraclat
