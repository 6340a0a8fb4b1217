#pragma once

#include <stdexcept>
#include <string>

namespace cmot {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration, unknown parameter group, inconsistent options.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Tensor or parameter shapes that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Anything wrong with input data on disk or in memory.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Per-frame files disagree in length, or a required file is missing.
class StructuralError : public DataError {
 public:
  using DataError::DataError;
};

/// A value violates a domain invariant (e.g. non-positive box size).
class ValidationError : public DataError {
 public:
  using DataError::DataError;
};

/// Malformed token or line. Carries the 1-based line number when known.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : DataError(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Not enough samples of some kind to proceed (e.g. an empty modality subset).
class InsufficientDataError : public DataError {
 public:
  using DataError::DataError;
};

class IoError : public DataError {
 public:
  using DataError::DataError;
};

/// Non-finite loss, score or gradient.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace cmot
