#pragma once

#include <stdexcept>
#include <string>

namespace fhdr {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Spatial extents cannot be processed (odd extents, zero-size output, crop too large).
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// An invalid configuration value (non-positive lr, negative lambda, bad wavelet name...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Misuse of a stateful object, e.g. recording into a graph after backward().
class StateError : public Error {
 public:
  using Error::Error;
};

/// Missing or malformed files.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values detected in a tensor, loss or parameter set.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace fhdr
