#include "tws/error.hpp"

namespace tws {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::io: return "io";
    case ErrorCode::config: return "config";
    case ErrorCode::validation: return "validation";
    case ErrorCode::usage: return "usage";
    case ErrorCode::empty_zone: return "empty_zone";
    case ErrorCode::undefined: return "undefined";
  }
  return "unknown";
}

}  // namespace tws
