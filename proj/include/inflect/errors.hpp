#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace inflect {

// Malformed input data (TSV rows, checkpoint files, mismatched keys).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Invalid model/training configuration or tensor shape contract violation.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Non-finite values produced during a computation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace inflect
