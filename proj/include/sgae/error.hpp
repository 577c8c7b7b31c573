#pragma once

#include <stdexcept>
#include <string>

namespace sgae {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or layer dimension mismatch.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment configuration (unknown key, inconsistent flags, bad range).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent data: parse failures, invariant violations,
/// unknown instance ids, incompatible checkpoints.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Violated API precondition or contract.
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace sgae
