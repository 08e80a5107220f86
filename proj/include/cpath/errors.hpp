#pragma once

#include <stdexcept>
#include <string>

namespace cpath {

/// Base for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes or matrix dimensions that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// An object was used in a state that forbids the operation.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values showed up where only finite ones are allowed.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed input text or binary data.
class ParseError : public Error {
 public:
  using Error::Error;
};

class ChecksumError : public ParseError {
 public:
  using ParseError::ParseError;
};

class VersionError : public ParseError {
 public:
  using ParseError::ParseError;
};

/// Invalid or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cpath
