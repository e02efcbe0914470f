#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pemix {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A matrix that must be positive definite failed its Cholesky factorization.
class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

/// Shape, index or argument-domain violations.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A mixture component collapsed below the minimum effective mass.
class DegenerateComponent : public Error {
 public:
  DegenerateComponent(std::size_t component, double mass, double min_mass)
      : Error("component " + std::to_string(component) + " has effective mass " +
              std::to_string(mass) + " below the minimum " + std::to_string(min_mass)),
        component_(component) {}

  std::size_t component() const noexcept { return component_; }

 private:
  std::size_t component_;
};

/// Floating point breakdown (e.g. every component density underflowed).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed rating table input. Row and column are 1-based positions in the source.
class ParseError : public Error {
 public:
  ParseError(std::size_t row, std::size_t column, const std::string& what)
      : Error("line " + std::to_string(row) + ", column " + std::to_string(column) + ": " + what),
        row_(row),
        column_(column) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

/// Filesystem failures while writing artifacts.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace pemix
