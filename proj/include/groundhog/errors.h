#ifndef GROUNDHOG_ERRORS_H_
#define GROUNDHOG_ERRORS_H_

#include <stdexcept>
#include <string>

namespace groundhog {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Operand shapes or lengths do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A value violates an operation precondition (range, ordering, count).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// An operation needing at least one set pixel / positive weight got none.
class EmptyMaskError : public Error {
 public:
  using Error::Error;
};

// Malformed or schema-invalid input data (corpus lines, files, configs).
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite values appeared during training or evaluation.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace groundhog

#endif  // GROUNDHOG_ERRORS_H_
