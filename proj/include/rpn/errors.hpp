#pragma once

#include <stdexcept>
#include <string>

namespace rpn {

// Base class for all library errors. Subclasses map onto the CLI exit-code
// contract: ConfigError -> 2, DataError -> 3, NumericError -> 4.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid configuration value or unknown key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Tensor shape/rank mismatch.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Index sequence that is not a bijection on the expected row range.
class PermutationError : public Error {
 public:
  using Error::Error;
};

// Token or row id out of range.
class IndexError : public Error {
 public:
  using Error::Error;
};

// Input data problems: missing files, malformed rows, bad dumps.
class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public DataError {
 public:
  using DataError::DataError;
};

class ParseError : public DataError {
 public:
  using DataError::DataError;
};

// Non-finite value where the contract demands finiteness.
class NumericError : public Error {
 public:
  using Error::Error;
};

// API misuse, e.g. backward() on a cache from a stale forward.
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace rpn
