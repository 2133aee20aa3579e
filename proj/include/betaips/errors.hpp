#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace betaips {

// Precondition of an operation was violated by the caller.
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite or underflowing quantity produced during computation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A closed-form baseline has a (numerically) zero denominator.
class DegenerateBaseline : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// All importance weights vanish, so self-normalisation is undefined.
class DegenerateSupport : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t row, std::string column, const std::string& what)
      : std::runtime_error(what), row_(row), column_(std::move(column)) {}

  // 1-based data row (0 for header problems).
  std::size_t row() const { return row_; }
  const std::string& column() const { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

// A logged propensity is not strictly positive.
class CommonSupportViolation : public ParseError {
 public:
  using ParseError::ParseError;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace betaips
