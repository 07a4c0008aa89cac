#pragma once

#include <stdexcept>
#include <string>

namespace hda {

/// Base of every error raised by the library. The CLI maps subclasses onto
/// exit codes (NumericalError and SeparabilityError -> 3, everything else -> 2).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A feature set that spans no subspace direction (k < 2, or all features
/// identical), or too few points for a 2D export.
class DegenerateDomain : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values in a forward pass, gradient or optimizer update.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Missing, unreadable or malformed files.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Synthetic domains whose encoded references do not form separated clusters.
class SeparabilityError : public Error {
 public:
  using Error::Error;
};

}  // namespace hda
