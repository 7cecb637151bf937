#include "common/error.hpp"

namespace straptor {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidEncoding: return "InvalidEncoding";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NoTableFound: return "NoTableFound";
    case ErrorCode::MalformedMarkup: return "MalformedMarkup";
    case ErrorCode::CorruptWorkbook: return "CorruptWorkbook";
    case ErrorCode::UnsupportedFeature: return "UnsupportedFeature";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::NestingTooDeep: return "NestingTooDeep";
    case ErrorCode::InvalidGrid: return "InvalidGrid";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::AuthFailure: return "AuthFailure";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::MissingScriptEntry: return "MissingScriptEntry";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::ModelError: return "ModelError";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::NodeNotFound: return "NodeNotFound";
    case ErrorCode::TypeMismatch: return "TypeMismatch";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::StructureViolation: return "StructureViolation";
    case ErrorCode::CycleCreated: return "CycleCreated";
    case ErrorCode::RootDeletion: return "RootDeletion";
    case ErrorCode::InvalidEdit: return "InvalidEdit";
    case ErrorCode::UnparseableCandidates: return "UnparseableCandidates";
    case ErrorCode::EmptyGrid: return "EmptyGrid";
    case ErrorCode::UndecomposableQuestion: return "UndecomposableQuestion";
    case ErrorCode::InvalidPlan: return "InvalidPlan";
    case ErrorCode::StepFailure: return "StepFailure";
    case ErrorCode::NoTrees: return "NoTrees";
    case ErrorCode::SessionNotFound: return "SessionNotFound";
    case ErrorCode::TreeNotFound: return "TreeNotFound";
    case ErrorCode::JobNotFound: return "JobNotFound";
    case ErrorCode::VersionConflict: return "VersionConflict";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

bool is_model_error(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Timeout:
    case ErrorCode::AuthFailure:
    case ErrorCode::MalformedResponse:
    case ErrorCode::MissingScriptEntry:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::ModelError:
    case ErrorCode::InvalidConfig:
      return true;
    default:
      return false;
  }
}

}  // namespace straptor
