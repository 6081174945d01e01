#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vlp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (h <= 0, d = 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Input violates a documented precondition of the model (PD off the ground plane, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Calibration or multilateration geometry does not determine the unknowns.
class SingularGeometryError : public Error {
 public:
  using Error::Error;
};

/// Calibration produced a zero c-vector, so tilt and gain are undefined.
class DegenerateEstimateError : public Error {
 public:
  using Error::Error;
};

/// RSS readings carry no usable range information.
class UnlocatableError : public Error {
 public:
  using Error::Error;
};

/// Fisher information is singular at the requested position.
class UnobservableError : public Error {
 public:
  using Error::Error;
};

class GpFitError : public Error {
 public:
  using Error::Error;
};

/// Semantic validation failure on a parsed document.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. Row and column are 1-based; 0 means "not applicable".
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row = 0, std::size_t column = 0)
      : Error(format(what, row, column)), row_(row), column_(column) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  static std::string format(const std::string& what, std::size_t row, std::size_t column) {
    std::string out = what;
    if (row > 0) {
      out += " (row " + std::to_string(row);
      if (column > 0) out += ", column " + std::to_string(column);
      out += ")";
    }
    return out;
  }

  std::size_t row_;
  std::size_t column_;
};

}  // namespace vlp
