#pragma once

#include <stdexcept>
#include <string>

namespace fptgrf {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or arguments (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (CLI exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
};

// No tree provides a nonempty leaf for the query point.
class UnidentifiedPointError : public DataError {
 public:
  UnidentifiedPointError()
      : DataError("unidentified point: every tree places the query in an empty leaf") {}
};

// Every tree's subsample contains the requested training index.
class NoOutOfBagTreesError : public DataError {
 public:
  explicit NoOutOfBagTreesError(std::size_t index)
      : DataError("no out-of-bag trees for training index " + std::to_string(index)) {}
};

// The weighted Gram matrix stays singular after the ridge fallback.
class DegenerateSystemError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace fptgrf
