#include "xrcast/error.hpp"

namespace xrcast {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::TruncatedHeader: return "TruncatedHeader";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::BadLinkType: return "BadLinkType";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::RowParseError: return "RowParseError";
    case ErrorCode::EmptyTrace: return "EmptyTrace";
    case ErrorCode::BadFilter: return "BadFilter";
    case ErrorCode::EmptySegment: return "EmptySegment";
    case ErrorCode::DegenerateDistribution: return "DegenerateDistribution";
    case ErrorCode::SeriesTooShort: return "SeriesTooShort";
    case ErrorCode::SplitTooSmall: return "SplitTooSmall";
    case ErrorCode::DegenerateSeries: return "DegenerateSeries";
    case ErrorCode::BadArgument: return "BadArgument";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::BadCheckpoint: return "BadCheckpoint";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::Empty: return "Empty";
    case ErrorCode::AllTermsSkipped: return "AllTermsSkipped";
    case ErrorCode::ZeroBase: return "ZeroBase";
    case ErrorCode::BadSpec: return "BadSpec";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, std::string_view module, const std::string& detail)
    : std::runtime_error(std::string(module) + ": " + std::string(to_string(code)) + ": " + detail),
      code_(code) {}

}  // namespace xrcast
