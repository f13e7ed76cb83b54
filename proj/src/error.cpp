#include "ubd/error.hpp"

namespace ubd {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "E_INVALID_ARGUMENT";
    case ErrorCode::InsufficientPoints: return "E_INSUFFICIENT_POINTS";
    case ErrorCode::DegenerateGeometry: return "E_DEGENERATE_GEOMETRY";
    case ErrorCode::TooSparse: return "E_TOO_SPARSE";
    case ErrorCode::EmptyTrainingSet: return "E_EMPTY_TRAINING_SET";
    case ErrorCode::SingleSample: return "E_SINGLE_SAMPLE";
    case ErrorCode::TooFewSamples: return "E_TOO_FEW_SAMPLES";
    case ErrorCode::DegenerateClustering: return "E_DEGENERATE_CLUSTERING";
    case ErrorCode::EmptyRange: return "E_EMPTY_RANGE";
    case ErrorCode::EmptyRoi: return "E_EMPTY_ROI";
    case ErrorCode::NoForeground: return "E_NO_FOREGROUND";
    case ErrorCode::NoOverlap: return "E_NO_OVERLAP";
    case ErrorCode::MissingRgb: return "E_MISSING_RGB";
    case ErrorCode::FrameMismatch: return "E_FRAME_MISMATCH";
    case ErrorCode::NoGroundTruth: return "E_NO_GROUND_TRUTH";
    case ErrorCode::SpecError: return "E_SPEC";
    case ErrorCode::ConfigError: return "E_CONFIG";
    case ErrorCode::FormatError: return "E_FORMAT";
    case ErrorCode::IoError: return "E_IO";
  }
  return "E_UNKNOWN";
}

}  // namespace ubd
