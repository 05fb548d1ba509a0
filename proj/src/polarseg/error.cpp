#include "polarseg/error.hpp"

namespace polarseg {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::StrideInvalid: return "StrideInvalid";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonPositiveRadius: return "NonPositiveRadius";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::Divergence: return "Divergence";
    case ErrorCode::Io: return "Io";
    case ErrorCode::CheckpointMismatch: return "CheckpointMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

void fail(ErrorCode code, const std::string& what) {
  throw Error(code, std::string(to_string(code)) + ": " + what);
}

}  // namespace polarseg
