#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tws {

/// Error categories surfaced by the library. The CLI maps these onto exit
/// codes and the `code` field of its error JSON.
enum class ErrorCode {
  io,          // unreadable/unwritable file or stream
  config,      // bad configuration: unknown format tag, missing field map entry, stale verdicts
  validation,  // input document violates an invariant (unclosed ring, duplicate id, ...)
  usage,       // caller violated a precondition (k > rows, zone mismatch, ...)
  empty_zone,  // zone has no activity, signature undefined
  undefined,   // statistic undefined (zero-variance target, single cluster)
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tws
