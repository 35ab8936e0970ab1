#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace xrcast {

enum class ErrorCode {
  // trace-ingest
  TruncatedHeader,
  BadMagic,
  BadLinkType,
  SchemaMismatch,
  RowParseError,
  EmptyTrace,
  BadFilter,
  // viewframe
  EmptySegment,
  DegenerateDistribution,
  // series-prep
  SeriesTooShort,
  SplitTooSmall,
  DegenerateSeries,
  BadArgument,
  // predictors
  BadConfig,
  NonFiniteLoss,
  ShapeMismatch,
  BadCheckpoint,
  // reslearn / metrics
  LengthMismatch,
  Empty,
  AllTermsSkipped,
  ZeroBase,
  // harness
  BadSpec,
  IoError,
  ConfigError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Single exception type for the library. The message is prefixed with the
/// module that raised it and the error name, e.g. "trace-ingest: BadMagic: ...".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string_view module, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace xrcast
