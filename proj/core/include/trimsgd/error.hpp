#pragma once

#include <stdexcept>
#include <string>

namespace trimsgd {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape disagreement between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Convolution / pooling geometry that does not tile the input.
class GeometryError : public Error {
 public:
  using Error::Error;
};

// Class label outside {1..L}.
class LabelError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents (bad magic, bad header).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Payload shorter or longer than its header promises.
class LengthError : public Error {
 public:
  using Error::Error;
};

// Hyperparameter or configuration value out of range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Configuration key that does not exist in the schema.
class UnknownKeyError : public ConfigError {
 public:
  explicit UnknownKeyError(std::string key)
      : ConfigError("unknown configuration key '" + key + "'"), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

// Stale or missing forward cache.
class StateError : public Error {
 public:
  using Error::Error;
};

// Training-clock value outside [0, 1].
class ClockError : public Error {
 public:
  using Error::Error;
};

// Empty or otherwise unusable input collection.
class InputError : public Error {
 public:
  using Error::Error;
};

// Histogram requested over losses that are all zero.
class DegenerateRangeError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Trial results that do not share a configuration.
class AggregationError : public Error {
 public:
  using Error::Error;
};

// Missing or unreadable file.
class FileError : public Error {
 public:
  using Error::Error;
};

// Internal invariant broken; indicates a bug, not bad input.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace trimsgd
