#pragma once

#include <stdexcept>
#include <string>

namespace godsbox {

// All library failures derive from Error so callers can map them to exit codes
// without knowing every concrete type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller supplied something malformed: wrong shape, out-of-range parameter.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Input parsed but violates a data invariant (NaN, zero row, bad label).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Text input could not be parsed. Carries the 1-based row and column.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t column)
      : Error(what + " (row " + std::to_string(row) + ", column " +
              std::to_string(column) + ")"),
        row_(row),
        column_(column) {}

  std::size_t row() const { return row_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

// Rank deficiency, loss of positive definiteness and similar.
class NumericalDegeneracy : public Error {
 public:
  using Error::Error;
};

class NonFiniteObjective : public Error {
 public:
  NonFiniteObjective(const std::string& what, std::size_t iterate)
      : Error(what + " at iterate " + std::to_string(iterate)), iterate_(iterate) {}

  std::size_t iterate() const { return iterate_; }

 private:
  std::size_t iterate_;
};

class LineSearchFailure : public Error {
 public:
  using Error::Error;
};

// Input is well-formed but the requested procedure has no meaningful answer,
// e.g. clustering a constant score vector.
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

}  // namespace godsbox
