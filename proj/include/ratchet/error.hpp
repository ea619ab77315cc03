#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ratchet {

enum class ErrorCode {
  NegativeEntry,
  NotNormalized,
  DimensionMismatch,
  InvalidArgument,
  InvalidK,
  StepTooLarge,
  InvalidStart,
  Extinct,
  WindowTooThin,
  StatisticalFloor,
  NoDecayWindow,
  ParseError,
  ValidationError,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Failures caused by too little statistical signal rather than bad input.
constexpr bool is_statistical(ErrorCode code) {
  return code == ErrorCode::StatisticalFloor || code == ErrorCode::WindowTooThin ||
         code == ErrorCode::NoDecayWindow;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ratchet
