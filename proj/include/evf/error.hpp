#pragma once

#include <stdexcept>
#include <string>

namespace evf {

/// Machine-readable failure categories. The CLI maps these onto exit codes.
enum class ErrorCode {
  invalid_spec,
  infeasible_spec,
  geometry,
  resolution,
  solver,
  modeling,
  extraction,
  curve,
  range,
  evaluation,
  parse,
  io,
};

[[nodiscard]] const char* to_string(ErrorCode code) noexcept;

/// Process exit code for a failure category (0 is reserved for success).
[[nodiscard]] int exit_code(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace evf
