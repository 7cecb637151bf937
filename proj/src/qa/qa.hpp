#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "common/error.hpp"
#include "gateway/gateway.hpp"
#include "tree/hotree.hpp"
#include "tree/operations.hpp"

namespace straptor::qa {

using nlohmann::json;

// ---- plans -----------------------------------------------------------------

// One step of a plan. `args` follows the plan wire format: literals, node id
// lists, or {"ref": k} naming the output of an earlier step k.
struct SubOperation {
  std::size_t id = 0;
  std::string op;
  json args = json::object();
  std::string note;
};

struct Plan {
  std::string question;
  std::string tree_id;
  std::vector<SubOperation> steps;

  json to_json() const;
  // Throws InvalidPlan.
  static Plan from_json(const json& j);
};

// Extracts {"steps": [...]} from a model reply (code fences and prose around
// the JSON are tolerated). Throws InvalidPlan.
Plan parse_plan_reply(const std::string& reply);

// Ops known, arguments present, references strictly backward. Throws InvalidPlan.
void validate_plan(const Plan& plan);

// ---- field types -------------------------------------------------------------

struct FieldTagConfig {
  double numeric_ratio = 0.9;
  double distinct_ratio = 0.5;
  std::size_t distinct_cap = 10;
};

tree::FieldType infer_field_type(const std::vector<std::string>& values, const FieldTagConfig& cfg = {});

// Types every Meta node that has Body children. Existing types are kept
// unless `overwrite` is set, so manual corrections survive.
tree::HOTree tag_field_types(const tree::HOTree& t, const FieldTagConfig& cfg = {}, bool overwrite = false);
bool needs_tagging(const tree::HOTree& t);

// ---- execution ---------------------------------------------------------------

struct StepRecord {
  std::size_t index = 0;
  std::string op;
  std::string note;
  json inputs;
  json output;
  double duration_ms = 0;
};

struct StepError {
  std::size_t step = 0;
  std::string op;
  ErrorCode code = ErrorCode::Internal;
  std::string message;
};

struct ExecutionTrace {
  std::vector<StepRecord> steps;  // successful steps, in order
  std::vector<std::string> retrieval_path;
  std::optional<StepError> failure;

  json to_json(bool with_durations = true) const;
};

struct Execution {
  ExecutionTrace trace;
  std::optional<tree::OpResult> result;  // final step output on success
  // Raw outputs per successful step, aligned with trace.steps.
  std::vector<tree::OpResult> outputs;
};

// Rejects invalid plans up front (InvalidPlan); step errors abort the run and
// are recorded in trace.failure.
Execution execute_plan(const Plan& plan, const tree::HOTree& t);
// Throws StepFailure when the run aborted.
void raise_on_failure(const Execution& e);

json op_result_json(const tree::OpResult& r);

// ---- verification --------------------------------------------------------------

struct ForwardCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerificationReport {
  std::vector<ForwardCheck> forward_checks;
  std::optional<bool> backward_agreement;
  std::optional<std::string> rephrased_question;
  std::string backward_detail;

  std::size_t forward_passed() const;
  json to_json() const;
};

std::vector<ForwardCheck> forward_verify(const Plan& plan, const Execution& exec, const tree::HOTree& t);

// 0.5 * forward pass fraction + 0.5 * {1, 0, 0.5} for agreement {true, false, absent}.
double confidence(const VerificationReport& v);

// Numeric: relative tolerance; text: case and whitespace insensitive.
bool answers_agree(const tree::OpResult& a, const tree::OpResult& b, double rel_tol = 1e-6);
// Same rules over rendered answers; comma-separated lists compare as multisets.
bool answer_texts_agree(const std::string& a, const std::string& b, double rel_tol = 1e-6);

// ---- decomposition ---------------------------------------------------------------

enum class DecomposerKind { Llm, Template };
std::string_view to_string(DecomposerKind k) noexcept;
std::optional<DecomposerKind> parse_decomposer_kind(std::string_view s) noexcept;

// Deterministic rule-based decomposer over sum/avg/min/max/count/top-k and
// lookup questions phrased with the tree's header labels. Throws
// UndecomposableQuestion.
Plan template_decompose(const std::string& question, const tree::HOTree& t);
// Deterministic paraphrase that template_decompose maps to the same plan.
std::string template_rephrase(const std::string& question, const tree::HOTree& t);

// Template "decompose", one re-prompt with "decompose.retry".
Plan llm_decompose(const std::string& question, const tree::HOTree& t, const gateway::Gateway& gw);
// Template "rephrase".
std::string llm_rephrase(const std::string& question, const gateway::Gateway& gw);

// Header outline given to the model: labels, field types, depth.
std::string schema_sketch(const tree::HOTree& t);

// ---- answers ---------------------------------------------------------------------

struct AnswerOptions {
  DecomposerKind decomposer = DecomposerKind::Llm;
  bool backward = true;
  FieldTagConfig tagging;
};

struct Answer {
  std::string text;
  double confidence = 0;
  double elapsed_ms = 0;
  std::optional<Plan> plan;
  ExecutionTrace trace;
  VerificationReport verification;
  json raw = nullptr;
  std::optional<ErrorCode> error;

  json to_json(bool with_timing = true) const;
};

// Human-readable value with the projecting field's percent/currency style.
std::string render_result(const tree::OpResult& r, const tree::HOTree& t, const Plan& plan, const Execution& exec);

// decompose -> execute -> forward/backward verify. Never throws for model or
// plan failures: those yield confidence 0 and `error` set.
Answer answer(const std::string& question, const tree::HOTree& t, const gateway::Gateway* gw,
              const AnswerOptions& options = {});

}  // namespace straptor::qa
