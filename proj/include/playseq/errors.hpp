#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace playseq {

// Base of every error thrown by the library. The CLI maps NumericError to
// exit code 3 and everything else to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad sizes, indices or hyperparameters passed by the caller.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Input file has no rows.
class EmptyInputError : public Error {
 public:
  using Error::Error;
};

// Structural problem in an input file (ragged rows, missing keys, ...).
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// A field could not be read as a non-negative integer. Line and column are
// 1-based.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : Error("line " + std::to_string(line) + ", column " +
              std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

// Observation symbol outside the model vocabulary.
class DomainError : public Error {
 public:
  DomainError(const std::string& what, std::size_t position)
      : Error(what), position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

// Model file written by an incompatible format version.
class VersionError : public Error {
 public:
  using Error::Error;
};

// Loaded parameters violate a model invariant (e.g. a row not summing to 1).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Inconsistent mixture/run configuration, e.g. n1 + n2 != n.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite likelihoods or similar numerical breakdowns.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace playseq
