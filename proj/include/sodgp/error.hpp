#pragma once

#include <stdexcept>
#include <string>

namespace sodgp {

// Every failure raised by the library derives from Error so callers can map
// module errors onto exit codes in one place.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numeric failures (exit code 1 at the CLI).
class NumericError : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public NumericError {
 public:
  using NumericError::NumericError;
};

class NumericalDivergence : public NumericError {
 public:
  NumericalDivergence(const std::string& what, long iteration)
      : NumericError(what), iteration_(iteration) {}
  long iteration() const { return iteration_; }

 private:
  long iteration_;
};

// Usage / shape / IO failures (exit code 2 at the CLI).
class UsageError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public UsageError {
 public:
  using UsageError::UsageError;
};

class NonScalarRoot : public UsageError {
 public:
  using UsageError::UsageError;
};

class InvalidArchitecture : public UsageError {
 public:
  using UsageError::UsageError;
};

class InvalidSize : public UsageError {
 public:
  using UsageError::UsageError;
};

class DegenerateData : public UsageError {
 public:
  using UsageError::UsageError;
};

class UntrainedModel : public UsageError {
 public:
  using UsageError::UsageError;
};

class IoError : public UsageError {
 public:
  using UsageError::UsageError;
};

class ParseError : public IoError {
 public:
  ParseError(const std::string& what, long line) : IoError(what), line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

class MissingTarget : public IoError {
 public:
  using IoError::IoError;
};

class VersionMismatch : public IoError {
 public:
  using IoError::IoError;
};

class ChecksumMismatch : public IoError {
 public:
  using IoError::IoError;
};

class InvalidFraction : public UsageError {
 public:
  using UsageError::UsageError;
};

}  // namespace sodgp
