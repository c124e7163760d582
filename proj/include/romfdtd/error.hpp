#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace romfdtd {

/// Diagnostic categories. Scenario parsing uses the kParse* family; the CLI
/// maps categories to process exit codes.
enum class ErrorCode {
  kInvalidArgument,
  kGeometry,
  kMaterial,
  kDimensionMismatch,
  kSingular,
  kNotSpd,
  kPassivity,
  kInstability,
  kTooLarge,
  kMisalignedInterface,
  kZeroSpectrum,
  kIo,
  kParseSyntax,
  kParseUnknownKey,
  kParseMissingField,
  kParseType,
  kParseInvariant,
};

inline std::string_view diagnostic_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "E001";
    case ErrorCode::kGeometry: return "E002";
    case ErrorCode::kMaterial: return "E003";
    case ErrorCode::kDimensionMismatch: return "E004";
    case ErrorCode::kSingular: return "E005";
    case ErrorCode::kNotSpd: return "E006";
    case ErrorCode::kPassivity: return "E007";
    case ErrorCode::kInstability: return "E008";
    case ErrorCode::kTooLarge: return "E009";
    case ErrorCode::kMisalignedInterface: return "E010";
    case ErrorCode::kZeroSpectrum: return "E011";
    case ErrorCode::kIo: return "E012";
    case ErrorCode::kParseSyntax: return "P101";
    case ErrorCode::kParseUnknownKey: return "P102";
    case ErrorCode::kParseMissingField: return "P103";
    case ErrorCode::kParseType: return "P104";
    case ErrorCode::kParseInvariant: return "P105";
  }
  return "E000";
}

inline bool is_parse_error(ErrorCode code) {
  return code >= ErrorCode::kParseSyntax;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(diagnostic_code(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace romfdtd
