#pragma once

#include <stdexcept>
#include <string>

namespace ionwalk {

enum class ErrorKind {
  InvalidArgument,
  DimensionMismatch,
  Truncation,
  InvalidPhysics,
  NoBracket,
  IllConditioned,
  NormDrift,
  Config,
};

const char* to_string(ErrorKind kind);

// Base for every diagnostic raised by the library. The kind drives the CLI
// exit code; the message is a one-line human readable diagnostic.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class TruncationError : public Error {
 public:
  explicit TruncationError(const std::string& what)
      : Error(ErrorKind::Truncation, what) {}
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what)
      : Error(ErrorKind::DimensionMismatch, what) {}
};

class PhysicsError : public Error {
 public:
  explicit PhysicsError(const std::string& what)
      : Error(ErrorKind::InvalidPhysics, what) {}
};

class NumericalError : public Error {
 public:
  NumericalError(ErrorKind kind, const std::string& what) : Error(kind, what) {}
};

}  // namespace ionwalk
