#pragma once

#include <stdexcept>
#include <string>

namespace rbm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-range input (domain files, configs, parameters).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A numerical routine could not meet its contract (solver breakdown,
/// truncation too aggressive, degenerate regression).
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace rbm
