#pragma once

#include <stdexcept>
#include <string>

namespace qkdnet {

enum class Errc {
  ParseError,
  ValidationError,
  OutOfOrderBlock,
  InsufficientKey,
  ReservationConsumed,
  LengthMismatch,
  KeyReuse,
  TagMismatch,
  ReplayDetected,
  NoRoute,
  KeyExhausted,
  RetryLimitExceeded,
  ScenarioError,
  TimeTravel,
  InvalidArgument,
};

const char* to_string(Errc code) noexcept;

/// Every failure raised by the library carries one of the Errc codes so
/// callers can branch on the condition rather than on message text.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace qkdnet
