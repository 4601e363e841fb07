#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aerostitch {

enum class ErrorCode {
  InsufficientSamples,
  NonMonotoneTime,
  SimpsonParity,
  NonUniformGrid,
  NonFiniteInput,
  OutOfRange,
  InvalidConfig,
  DegenerateScale,
  ShearSingularity,
  SingularCorrection,
  PointAtInfinity,
  ImageTooSmall,
  InsufficientCorrespondences,
  DegenerateConfiguration,
  NoConsensus,
  InvalidFlightSpec,
  ParseError,
  IoError,
  EvalRequiresTruth,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::NonMonotoneTime: return "NonMonotoneTime";
    case ErrorCode::SimpsonParity: return "SimpsonParity";
    case ErrorCode::NonUniformGrid: return "NonUniformGrid";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::DegenerateScale: return "DegenerateScale";
    case ErrorCode::ShearSingularity: return "ShearSingularity";
    case ErrorCode::SingularCorrection: return "SingularCorrection";
    case ErrorCode::PointAtInfinity: return "PointAtInfinity";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::InsufficientCorrespondences: return "InsufficientCorrespondences";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::NoConsensus: return "NoConsensus";
    case ErrorCode::InvalidFlightSpec: return "InvalidFlightSpec";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::EvalRequiresTruth: return "EvalRequiresTruth";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can branch on the kind of failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace aerostitch
