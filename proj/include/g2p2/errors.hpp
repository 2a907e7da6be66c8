#pragma once

#include <stdexcept>
#include <string>

namespace g2p2 {

// Base class for all errors thrown by this library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape or index mismatch.
class ShapeError : public Error {
public:
  using Error::Error;
};

// Invalid input data, file contents, or configuration.
class ValidationError : public Error {
public:
  using Error::Error;
};

// File could not be read or written.
class IoError : public Error {
public:
  using Error::Error;
};

// Non-finite values or other numeric breakdown during training.
class NumericError : public Error {
public:
  using Error::Error;
};

}  // namespace g2p2
