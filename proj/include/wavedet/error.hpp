#pragma once

#include <stdexcept>
#include <string>

namespace wavedet {

// Every failure raised by the library derives from Error. The CLI maps the
// categories onto exit codes (config → 2, data → 3, invariant → 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside an operation's documented domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Input that is well-formed but carries no usable information
/// (all-zero pulse, constant column, ...).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent experiment or pipeline configuration.
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

/// Malformed or missing on-disk data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A computed result failed one of its output invariants.
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace wavedet
