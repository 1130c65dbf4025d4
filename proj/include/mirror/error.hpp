#pragma once

#include <stdexcept>
#include <string>

namespace mirror {

enum class ErrorKind {
  degenerate_input,
  shape,
  range,
  insufficient_data,
  numeric_blowup,
  invariant,
  undefined_phase,
  undefined_statistic,
  config_schema,
  io,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::degenerate_input: return "degenerate input";
    case ErrorKind::shape: return "shape mismatch";
    case ErrorKind::range: return "out of range";
    case ErrorKind::insufficient_data: return "insufficient data";
    case ErrorKind::numeric_blowup: return "numeric blowup";
    case ErrorKind::invariant: return "invariant violation";
    case ErrorKind::undefined_phase: return "undefined phase";
    case ErrorKind::undefined_statistic: return "undefined statistic";
    case ErrorKind::config_schema: return "config schema";
    case ErrorKind::io: return "i/o";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Process exit codes used by the command-line tool.
inline int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::numeric_blowup:
    case ErrorKind::undefined_phase:
    case ErrorKind::undefined_statistic:
    case ErrorKind::invariant:
      return 3;
    case ErrorKind::config_schema:
      return 4;
    default:
      return 2;
  }
}

}  // namespace mirror
