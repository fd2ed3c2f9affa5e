#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace medpipe {

enum class ErrorCode {
  parse,
  schema,
  not_found,
  io,
  sandbox,
  too_large,
  invalid_target,
  invalid_argument,
  config,
  backend,
  script_exhausted,
  hand_off,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the engine carries a machine-readable code next to
/// the human-readable message; tool errors are turned into observations by
/// `dispatch`, the rest propagate to the caller.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class BackendError : public Error {
 public:
  BackendError(const std::string& message, int attempts)
      : Error(ErrorCode::backend, message), attempts_(attempts) {}

  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

}  // namespace medpipe
