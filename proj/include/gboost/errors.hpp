#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace gboost {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Vector lengths disagree (logits vs vocabulary, or between operands).
class ShapeError : public Error {
 public:
  using Error::Error;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

/// Internal bookkeeping was found in a state it should never reach.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

/// Failure inside a model or reward backend. When raised during step
/// generation, `position()` holds the token index inside the step.
class BackendError : public Error {
 public:
  explicit BackendError(const std::string& what, std::optional<std::size_t> position = std::nullopt)
      : Error(what), position_(position) {}

  std::optional<std::size_t> position() const noexcept { return position_; }

 private:
  std::optional<std::size_t> position_;
};

/// 4xx from a remote server. Never retried.
class RequestError : public BackendError {
 public:
  RequestError(const std::string& what, int status) : BackendError(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

/// Server answered, but the body violates the wire schema.
class ProtocolError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// Connection failures, timeouts and 5xx once retries are exhausted.
class TransportError : public BackendError {
 public:
  using BackendError::BackendError;
};

}  // namespace gboost
