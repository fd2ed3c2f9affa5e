#include "medpipe/error.hpp"

namespace medpipe {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::parse: return "parse error";
    case ErrorCode::schema: return "schema error";
    case ErrorCode::not_found: return "not found";
    case ErrorCode::io: return "I/O error";
    case ErrorCode::sandbox: return "sandbox violation";
    case ErrorCode::too_large: return "too large";
    case ErrorCode::invalid_target: return "invalid target";
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::config: return "configuration error";
    case ErrorCode::backend: return "backend error";
    case ErrorCode::script_exhausted: return "script exhausted";
    case ErrorCode::hand_off: return "hand-off error";
  }
  return "error";
}

}  // namespace medpipe
