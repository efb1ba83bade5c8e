#include "idprof/error.hpp"

namespace idprof {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::CloudTooSmall: return "CloudTooSmall";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::BudgetTooSmall: return "BudgetTooSmall";
    case ErrorCode::AllPointsIdentical: return "AllPointsIdentical";
    case ErrorCode::ZeroFirstNeighbor: return "ZeroFirstNeighbor";
    case ErrorCode::TooFewValid: return "TooFewValid";
    case ErrorCode::DegenerateFit: return "DegenerateFit";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::DeltaOutOfRange: return "DeltaOutOfRange";
    case ErrorCode::AngleOutOfRange: return "AngleOutOfRange";
    case ErrorCode::FractionOutOfRange: return "FractionOutOfRange";
    case ErrorCode::UnreadableImage: return "UnreadableImage";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::InconsistentRows: return "InconsistentRows";
    case ErrorCode::LayerMismatch: return "LayerMismatch";
    case ErrorCode::LayerOrder: return "LayerOrder";
    case ErrorCode::TooFewLayers: return "TooFewLayers";
  }
  return "Unknown";
}

bool is_io_error(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::IoFailure:
    case ErrorCode::BadMagic:
    case ErrorCode::TruncatedFile:
    case ErrorCode::UnreadableImage:
      return true;
    default:
      return false;
  }
}

}  // namespace idprof
