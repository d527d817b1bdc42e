#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sslab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text. line() is 1-based; 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + msg : msg),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

// A pairwise similarity has no value for the given counts (zero or full
// marginal). Callers building a matrix substitute 0.
class UndefinedSimilarity : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

}  // namespace sslab
