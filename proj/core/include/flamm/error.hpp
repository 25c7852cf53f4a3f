#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace flamm {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape mismatch, empty input, non-finite values, bad arguments.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A linear system or decomposition could not be solved.
class NumericalFailure : public Error {
 public:
  NumericalFailure(const std::string& what, double condition_estimate)
      : Error(what), condition_estimate_(condition_estimate) {}

  double condition_estimate() const noexcept { return condition_estimate_; }

 private:
  double condition_estimate_;
};

/// A feature row is identically zero where a strictly positive norm is needed.
class DegenerateFeature : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// Training data does not contain both classes.
class DegenerateLabels : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// Malformed input file. `line()` is 1-based, 0 when not line-specific.
class ParseError : public InvalidInput {
 public:
  ParseError(const std::string& what, std::size_t line)
      : InvalidInput(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace flamm
