#include "qkdnet/error.hpp"

namespace qkdnet {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::ParseError: return "ParseError";
    case Errc::ValidationError: return "ValidationError";
    case Errc::OutOfOrderBlock: return "OutOfOrderBlock";
    case Errc::InsufficientKey: return "InsufficientKey";
    case Errc::ReservationConsumed: return "ReservationConsumed";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::KeyReuse: return "KeyReuse";
    case Errc::TagMismatch: return "TagMismatch";
    case Errc::ReplayDetected: return "ReplayDetected";
    case Errc::NoRoute: return "NoRoute";
    case Errc::KeyExhausted: return "KeyExhausted";
    case Errc::RetryLimitExceeded: return "RetryLimitExceeded";
    case Errc::ScenarioError: return "ScenarioError";
    case Errc::TimeTravel: return "TimeTravel";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

}  // namespace qkdnet
