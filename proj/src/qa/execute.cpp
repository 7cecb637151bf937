#include <chrono>
#include <set>

#include "qa/lower.hpp"
#include "qa/qa.hpp"

namespace straptor::qa {

using tree::OpResult;

json op_result_json(const OpResult& r) {
  switch (r.kind) {
    case OpResult::Kind::NodeSet: return {{"kind", "node_set"}, {"nodes", r.nodes}};
    case OpResult::Kind::ValueList: {
      json vs = json::array();
      for (const auto& v : r.values) vs.push_back(detail::value_json(v));
      return {{"kind", "value_list"}, {"values", vs}};
    }
    case OpResult::Kind::Scalar: return {{"kind", "scalar"}, {"value", detail::value_json(r.scalar)}};
    case OpResult::Kind::Boolean: return {{"kind", "boolean"}, {"value", r.boolean}};
  }
  return nullptr;
}

json ExecutionTrace::to_json(bool with_durations) const {
  json s = json::array();
  for (const auto& r : steps) {
    json j{{"index", r.index}, {"op", r.op}, {"note", r.note}, {"inputs", r.inputs}, {"output", r.output}};
    if (with_durations) j["duration_ms"] = r.duration_ms;
    s.push_back(std::move(j));
  }
  json f = nullptr;
  if (failure)
    f = {{"step", failure->step}, {"op", failure->op}, {"code", to_string(failure->code)}, {"message", failure->message}};
  return {{"steps", s}, {"retrieval_path", retrieval_path}, {"failure", f}};
}

Execution execute_plan(const Plan& plan, const tree::HOTree& t) {
  validate_plan(plan);
  Execution e;
  std::set<std::string> on_path;
  for (const auto& step : plan.steps) {
    const auto start = std::chrono::steady_clock::now();
    try {
      auto op = detail::lower_step(step, e.outputs, t);
      auto out = tree::execute_tree_op(t, op);
      StepRecord rec;
      rec.index = step.id;
      rec.op = step.op;
      rec.note = step.note;
      rec.inputs = detail::op_json(op);
      rec.output = op_result_json(out);
      rec.duration_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      for (const auto& id : out.visited)
        if (on_path.insert(id).second) e.trace.retrieval_path.push_back(id);
      e.trace.steps.push_back(std::move(rec));
      e.outputs.push_back(std::move(out));
    } catch (const Error& err) {
      e.trace.failure = StepError{step.id, step.op, err.code(), err.what()};
      break;
    } catch (const std::exception& err) {
      e.trace.failure = StepError{step.id, step.op, ErrorCode::Internal, err.what()};
      break;
    }
  }
  if (!e.trace.failure) e.result = e.outputs.back();
  return e;
}

void raise_on_failure(const Execution& e) {
  if (!e.trace.failure) return;
  const auto& f = *e.trace.failure;
  fail(ErrorCode::StepFailure, "step " + std::to_string(f.step) + " (" + f.op + ") failed: " +
                                   std::string(to_string(f.code)) + ": " + f.message);
}

}  // namespace straptor::qa
