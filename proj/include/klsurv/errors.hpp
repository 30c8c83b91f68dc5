#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace klsurv {

// Base for every error raised by the library. CLI maps these to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Linear predictor outside the admissible domain of an inverse link
// (only the log link has a restricted domain: x < 0).
class DomainError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Prior predictions or prior coefficients that cannot be lined up with the
// local data.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

class UnknownCovariateError : public AlignmentError {
 public:
  explicit UnknownCovariateError(std::vector<std::string> names);
  const std::vector<std::string>& names() const noexcept { return names_; }

 private:
  std::vector<std::string> names_;
};

class TauMismatchError : public AlignmentError {
 public:
  using AlignmentError::AlignmentError;
};

class NoEventsError : public Error {
 public:
  using Error::Error;
};

class SingularHessianError : public Error {
 public:
  SingularHessianError(std::size_t index, const std::string& what)
      : Error(what), index_(index) {}
  // Position in the joined (eta_1..eta_tau, beta_1..beta_p) parameter vector.
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

// A baseline parameter for a period that no training subject reached.
class UnestimableError : public Error {
 public:
  using Error::Error;
};

class DegenerateFoldError : public Error {
 public:
  DegenerateFoldError(int fold, const std::string& what)
      : Error(what), fold_(fold) {}
  int fold() const noexcept { return fold_; }

 private:
  int fold_;
};

// Malformed user input (files, flags). Carries a location when known.
class InputError : public Error {
 public:
  InputError(const std::string& what, std::size_t line = 0,
             std::size_t column = 0);
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace klsurv
