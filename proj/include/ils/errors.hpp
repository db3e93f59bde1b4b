#pragma once

#include <stdexcept>
#include <string>

namespace ils {

enum class ErrorCode {
  GimbalLock,
  DomainError,
  DivByZero,
  DimensionMismatch,
  NotPositiveDefinite,
  DuplicateKey,
  DanglingVariable,
  EmptyStack,
  IndexOutOfRange,
  InvalidSelection,
  AllFactorsInvalid,
  DepthTooSmall,
  ParseError,
  NonPSDInformation,
  UnknownTag,
  Disconnected,
  KeyMismatch,
  InvalidArgument,
  IoError,
};

const char* to_string(ErrorCode code);

/// Library-wide exception. `location()` carries the offending line number
/// for parse errors, the block index for factorization failures, or -1.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, long location = -1)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        location_(location) {}

  ErrorCode code() const noexcept { return code_; }
  long location() const noexcept { return location_; }

 private:
  ErrorCode code_;
  long location_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::GimbalLock: return "GimbalLock";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::DivByZero: return "DivByZero";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::DuplicateKey: return "DuplicateKey";
    case ErrorCode::DanglingVariable: return "DanglingVariable";
    case ErrorCode::EmptyStack: return "EmptyStack";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::InvalidSelection: return "InvalidSelection";
    case ErrorCode::AllFactorsInvalid: return "AllFactorsInvalid";
    case ErrorCode::DepthTooSmall: return "DepthTooSmall";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::NonPSDInformation: return "NonPSDInformation";
    case ErrorCode::UnknownTag: return "UnknownTag";
    case ErrorCode::Disconnected: return "Disconnected";
    case ErrorCode::KeyMismatch: return "KeyMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace ils
