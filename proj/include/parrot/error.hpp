#pragma once

#include <stdexcept>
#include <string>

namespace parrot {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated an operation's precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Bad or incomplete configuration (maps to CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Failure reading or writing a file.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A backend does not offer the requested capability.
class CapabilityError : public Error {
 public:
  explicit CapabilityError(const std::string& capability)
      : Error("capability unsupported: " + capability) {}
};

/// The backend answered, but with an unusable response.
class BackendError : public Error {
 public:
  using Error::Error;
};

/// The backend produced no text.
class EmptyGenerationError : public BackendError {
 public:
  EmptyGenerationError() : BackendError("empty generation") {}
};

/// Network-level failure. Retryable; carries the number of attempts made.
class TransportError : public BackendError {
 public:
  TransportError(const std::string& what, int attempts)
      : BackendError(what + " (after " + std::to_string(attempts) + " attempts)"),
        attempts_(attempts) {}

  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

}  // namespace parrot
