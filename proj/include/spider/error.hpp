#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spider {

enum class ErrorCode {
  LengthMismatch,
  DimMismatch,
  EmptyMask,
  InvalidLevel,
  IllegalOrder,
  OutOfFrame,
  NonPositiveTau,
  UnnormalizedProbs,
  MissingLogits,
  BoundaryPoint,
  Unsatisfiable,
  UniquenessFailure,
  UnknownRegion,
  SchemaViolation,
  NoRegions,
  PeerUnreachable,
  ProtocolViolation,
  EmptyResults,
  DegenerateInput,
  DegenerateMatrix,
  EmptyInput,
  IoError,
  ConfigError,
  IdMismatch,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::InvalidLevel: return "InvalidLevel";
    case ErrorCode::IllegalOrder: return "IllegalOrder";
    case ErrorCode::OutOfFrame: return "OutOfFrame";
    case ErrorCode::NonPositiveTau: return "NonPositiveTau";
    case ErrorCode::UnnormalizedProbs: return "UnnormalizedProbs";
    case ErrorCode::MissingLogits: return "MissingLogits";
    case ErrorCode::BoundaryPoint: return "BoundaryPoint";
    case ErrorCode::Unsatisfiable: return "Unsatisfiable";
    case ErrorCode::UniquenessFailure: return "UniquenessFailure";
    case ErrorCode::UnknownRegion: return "UnknownRegion";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::NoRegions: return "NoRegions";
    case ErrorCode::PeerUnreachable: return "PeerUnreachable";
    case ErrorCode::ProtocolViolation: return "ProtocolViolation";
    case ErrorCode::EmptyResults: return "EmptyResults";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::DegenerateMatrix: return "DegenerateMatrix";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IdMismatch: return "IdMismatch";
  }
  return "Unknown";
}

/// Every failure in the toolkit is reported as an Error carrying a code, so
/// callers (the CLI in particular) can map failure classes to exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace spider
