#pragma once

#include <stdexcept>
#include <string>

namespace vaguegan {

// Every failure raised by the library derives from Error so callers (the CLI,
// the Python bindings) can catch one type and still tell the cases apart.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MissingFileError : public Error {
 public:
  using Error::Error;
};

class DecodeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Raised for configuration values outside their documented domain. `field()`
// names the offending key so the CLI can report it.
class InvalidConfigError : public Error {
 public:
  InvalidConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class InvalidTensorError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NonFiniteError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace vaguegan
