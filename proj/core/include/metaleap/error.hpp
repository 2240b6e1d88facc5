#pragma once

#include <stdexcept>
#include <string>

namespace metaleap {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform for the requested operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A precondition on an argument (step size, count, id, ...) was violated.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A computation produced NaN/Inf or hit a degenerate geometric case.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Cosine distance or normalization of a zero-norm vector.
class DegenerateVectorError : public NumericError {
 public:
  DegenerateVectorError() : NumericError("degenerate vector") {}
  explicit DegenerateVectorError(const std::string& where)
      : NumericError("degenerate vector: " + where) {}
};

/// Statistic undefined for the input (e.g. correlation with a constant list).
class UndefinedStatisticError : public Error {
 public:
  UndefinedStatisticError() : Error("undefined correlation") {}
};

}  // namespace metaleap
