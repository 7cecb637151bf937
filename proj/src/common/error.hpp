#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace straptor {

// Every failure the core raises carries one of these codes. The C API and the
// HTTP layer translate them; nothing else should switch on message text.
enum class ErrorCode {
  // table-ingest
  InvalidEncoding,
  EmptyInput,
  NoTableFound,
  MalformedMarkup,
  CorruptWorkbook,
  UnsupportedFeature,
  UnsupportedFormat,
  NestingTooDeep,
  InvalidGrid,
  // model-gateway
  Timeout,
  AuthFailure,
  MalformedResponse,
  MissingScriptEntry,
  DimensionMismatch,
  ZeroVector,
  ModelError,
  InvalidConfig,
  // tree-core
  NodeNotFound,
  TypeMismatch,
  SyntaxError,
  SchemaViolation,
  StructureViolation,
  CycleCreated,
  RootDeletion,
  InvalidEdit,
  // table2tree
  UnparseableCandidates,
  EmptyGrid,
  // qa-pipeline
  UndecomposableQuestion,
  InvalidPlan,
  StepFailure,
  // agent / service
  NoTrees,
  SessionNotFound,
  TreeNotFound,
  JobNotFound,
  VersionConflict,
  InvalidArgument,
  Io,
  Internal,
};

std::string_view to_string(ErrorCode code) noexcept;

// True for the errors that originate in a model provider (used to decide
// fail-soft fallbacks such as absent backward agreement).
bool is_model_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message)
      : std::runtime_error(std::move(message)), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, std::string message) {
  throw Error(code, std::move(message));
}

}  // namespace straptor
