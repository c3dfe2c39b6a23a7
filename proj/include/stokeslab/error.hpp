#pragma once

#include <stdexcept>
#include <string>

namespace stokeslab {

enum class ErrorKind {
  invalid_argument,
  invariant_violation,
  geometry,
  mesh,
  solver,
  config,
  io,
};

const char* to_string(ErrorKind kind);

/// Library-wide exception. `what()` carries a human readable message, `kind()`
/// lets callers (the CLI in particular) map failures onto exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace stokeslab
