#pragma once

#include <stdexcept>
#include <string>

namespace vo {

// Base class for all errors thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shape or dimension disagreement.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Violated API precondition (bad argument, wrong call order).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Malformed input text; carries the 1-based offending line when known
// (line() == 0 means no line applies).
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error(what) {}
  ParseError(const std::string& what, int line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  int line() const { return line_; }

 private:
  int line_ = 0;
};

// Degenerate trajectory alignment problem.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

// Invalid run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace vo
