#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tubelink {

enum class ErrorCode {
  InvalidInterval,
  InvalidBox,
  Ordering,
  MalformedScores,
  Range,
  InfeasibleStride,
  MixedSpan,
  Span,
  Shape,
  Alignment,
  Vocabulary,
  Parse,
  Contiguity,
  Schema,
  Config,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInterval: return "invalid-interval";
    case ErrorCode::InvalidBox: return "invalid-box";
    case ErrorCode::Ordering: return "ordering";
    case ErrorCode::MalformedScores: return "malformed-scores";
    case ErrorCode::Range: return "range";
    case ErrorCode::InfeasibleStride: return "infeasible-stride";
    case ErrorCode::MixedSpan: return "mixed-span";
    case ErrorCode::Span: return "span";
    case ErrorCode::Shape: return "shape";
    case ErrorCode::Alignment: return "alignment";
    case ErrorCode::Vocabulary: return "vocabulary";
    case ErrorCode::Parse: return "parse";
    case ErrorCode::Contiguity: return "contiguity";
    case ErrorCode::Schema: return "schema";
    case ErrorCode::Config: return "config";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + " error: " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tubelink
