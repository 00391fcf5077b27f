#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace coff {

enum class ErrorCode {
  InvalidArgument,
  DegenerateConfiguration,
  EmptyInput,
  DimensionMismatch,
  NonFinite,
  NoValidCandidate,
  EmptyCorrespondences,
  EmptyList,
  NonPositiveProbability,
  DegenerateInput,
  EmptyOverlap,
  ParseError,
  UnsupportedFormat,
  SchemaError,
  IoError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NoValidCandidate: return "NoValidCandidate";
    case ErrorCode::EmptyCorrespondences: return "EmptyCorrespondences";
    case ErrorCode::EmptyList: return "EmptyList";
    case ErrorCode::NonPositiveProbability: return "NonPositiveProbability";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::EmptyOverlap: return "EmptyOverlap";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

// Every failure raised by the library carries one of the codes above so that
// callers (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace coff
