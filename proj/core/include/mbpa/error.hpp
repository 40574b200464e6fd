#pragma once

#include <stdexcept>
#include <string>

namespace mbpa {

// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dimension or length mismatch between two operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Retrieval from an empty memory or with an empty context.
class EmptyMemoryError : public Error {
 public:
  using Error::Error;
};

// Malformed binary file (bad magic, truncation, inconsistent counts).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Invalid run configuration; message carries the offending key path.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace mbpa
