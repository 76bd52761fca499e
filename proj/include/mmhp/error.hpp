#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mmhp {

/// Machine-readable error categories. The CLI maps numerical diagnostics to
/// exit code 2 and everything else to exit code 1.
enum class ErrorCode {
  invalid_input,
  invalid_state,
  non_stationary,
  unsupported,
  ambiguity,
  degenerate_posterior,
  instability,
  optimizer_failure,
};

[[nodiscard]] constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_input: return "invalid_input";
    case ErrorCode::invalid_state: return "invalid_state";
    case ErrorCode::non_stationary: return "non_stationary";
    case ErrorCode::unsupported: return "unsupported";
    case ErrorCode::ambiguity: return "ambiguity";
    case ErrorCode::degenerate_posterior: return "degenerate_posterior";
    case ErrorCode::instability: return "instability";
    case ErrorCode::optimizer_failure: return "optimizer_failure";
  }
  return "unknown";
}

[[nodiscard]] constexpr bool is_numerical(ErrorCode code) noexcept {
  return code == ErrorCode::degenerate_posterior || code == ErrorCode::instability ||
         code == ErrorCode::optimizer_failure;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace mmhp
