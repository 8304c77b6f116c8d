#pragma once

#include <stdexcept>

namespace polyprotect {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
  using Error::Error;
};

class FormatError : public Error {
public:
  using Error::Error;
};

// A (identity, sample) pair appeared twice in one embedding set.
class DuplicateSampleError : public FormatError {
public:
  using FormatError::FormatError;
};

class ParameterError : public Error {
public:
  using Error::Error;
};

class ZeroVectorError : public Error {
public:
  using Error::Error;
};

class DegenerateRangeError : public Error {
public:
  using Error::Error;
};

class EmptySetError : public Error {
public:
  using Error::Error;
};

class DimensionError : public Error {
public:
  using Error::Error;
};

class NonFiniteError : public Error {
public:
  using Error::Error;
};

class InvariantError : public Error {
public:
  using Error::Error;
};

class KeyMismatchError : public Error {
public:
  using Error::Error;
};

class ZeroTemplateError : public Error {
public:
  using Error::Error;
};

class NumericalFailure : public Error {
public:
  using Error::Error;
};

class InsufficientDataError : public Error {
public:
  using Error::Error;
};

class KeySelectionExhausted : public Error {
public:
  using Error::Error;
};

}  // namespace polyprotect
