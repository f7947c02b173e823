#pragma once

#include <stdexcept>
#include <string>

namespace oncobench {

// Numeric values double as CLI exit codes and C API status codes.
enum class ErrorKind : int {
  validation = 1,
  io = 2,
  backend = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message)
      : Error(ErrorKind::validation, message) {}
};

/// Invalid combination of options (e.g. dense retrieval without embeddings).
class ConfigError : public ValidationError {
 public:
  explicit ConfigError(const std::string& message)
      : ValidationError("configuration error: " + message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error(ErrorKind::io, message) {}
};

class BackendError : public Error {
 public:
  BackendError(const std::string& message, int http_status = 0)
      : Error(ErrorKind::backend, message), http_status_(http_status) {}

  /// Last HTTP status seen, 0 when no response was received.
  int http_status() const noexcept { return http_status_; }

 private:
  int http_status_;
};

}  // namespace oncobench
