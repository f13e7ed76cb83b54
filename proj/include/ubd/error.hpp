#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ubd {

enum class ErrorCode {
  InvalidArgument,
  InsufficientPoints,
  DegenerateGeometry,
  TooSparse,
  EmptyTrainingSet,
  SingleSample,
  TooFewSamples,
  DegenerateClustering,
  EmptyRange,
  EmptyRoi,
  NoForeground,
  NoOverlap,
  MissingRgb,
  FrameMismatch,
  NoGroundTruth,
  SpecError,
  ConfigError,
  FormatError,
  IoError,
};

/// Stable machine-parsable name, used as the prefix of CLI error messages.
[[nodiscard]] std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ubd
