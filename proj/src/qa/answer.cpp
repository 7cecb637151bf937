#include <chrono>

#include "common/text.hpp"
#include "qa/qa.hpp"
#include "tree/numeric.hpp"

namespace straptor::qa {

using tree::OpResult;

json Answer::to_json(bool with_timing) const {
  json notes = json::array();
  if (plan)
    for (const auto& s : plan->steps) notes.push_back(s.note);
  json j{{"text", text},
         {"confidence", confidence},
         {"plan", plan ? plan->to_json() : json(nullptr)},
         {"sub_questions", notes},
         {"retrieval_path", trace.retrieval_path},
         {"trace", trace.to_json(with_timing)},
         {"verification", verification.to_json()},
         {"raw", raw},
         {"error", error ? json(to_string(*error)) : json(nullptr)}};
  if (with_timing) j["elapsed_ms"] = elapsed_ms;
  return j;
}

namespace {

// Style of the first value fed into the last arithmetic step.
tree::NumberStyle projecting_style(const Execution& exec, const tree::HOTree& t) {
  for (std::size_t i = exec.trace.steps.size(); i-- > 0;) {
    const auto& rec = exec.trace.steps[i];
    if (rec.op != "aggregate" && rec.op != "top_k") continue;
    if (rec.op == "aggregate" && rec.inputs.value("fn", "") == "count") return {};
    for (const auto& v : rec.inputs.value("values", json::array())) {
      if (v.contains("source") && t.contains(v["source"].get<std::string>()))
        return tree::number_style_of(t.node(v["source"].get<std::string>()).label);
      return tree::number_style_of(v.value("text", ""));
    }
  }
  return {};
}

}  // namespace

std::string render_result(const OpResult& r, const tree::HOTree& t, const Plan&, const Execution& exec) {
  switch (r.kind) {
    case OpResult::Kind::Scalar:
      if (r.scalar.number) return projecting_style(exec, t).render(*r.scalar.number);
      return r.scalar.text;
    case OpResult::Kind::Boolean: return r.boolean ? "yes" : "no";
    case OpResult::Kind::ValueList: {
      if (r.values.empty()) return "no matching values";
      std::vector<std::string> parts;
      for (const auto& v : r.values) parts.push_back(v.text);
      return text::join(parts, ", ");
    }
    case OpResult::Kind::NodeSet: {
      if (r.nodes.empty()) return "no matching entries";
      std::vector<std::string> parts;
      for (const auto& id : r.nodes) parts.push_back(t.node(id).label);
      return text::join(parts, ", ");
    }
  }
  return "";
}

namespace {

Plan decompose_with(const std::string& question, const tree::HOTree& t, const gateway::Gateway* gw,
                    DecomposerKind kind) {
  if (kind == DecomposerKind::Template) return template_decompose(question, t);
  if (!gw || !gw->has(gateway::ProviderKind::Llm))
    fail(ErrorCode::InvalidConfig, "the llm decomposer needs an LLM provider");
  return llm_decompose(question, t, *gw);
}

void backward_verify(const std::string& question, const OpResult& result, const tree::HOTree& t,
                     const gateway::Gateway* gw, const AnswerOptions& options, VerificationReport& v) {
  std::string rephrased;
  try {
    if (options.decomposer == DecomposerKind::Template) {
      rephrased = template_rephrase(question, t);
    } else {
      if (!gw) fail(ErrorCode::InvalidConfig, "no gateway for rephrasing");
      rephrased = llm_rephrase(question, *gw);
    }
  } catch (const Error& e) {
    v.backward_detail = "rephrasing unavailable: " + std::string(e.what());
    return;
  }
  v.rephrased_question = rephrased;
  try {
    const auto plan = decompose_with(rephrased, t, gw, options.decomposer);
    const auto exec = execute_plan(plan, t);
    if (!exec.result) {
      v.backward_agreement = false;
      v.backward_detail = "rephrased run failed at step " + std::to_string(exec.trace.failure->step) + ": " +
                          exec.trace.failure->message;
      return;
    }
    v.backward_agreement = answers_agree(result, *exec.result);
    v.backward_detail = *v.backward_agreement ? "rephrased question gives the same answer"
                                              : "rephrased question gives " + op_result_json(*exec.result).dump();
  } catch (const Error& e) {
    if (is_model_error(e.code())) {
      v.backward_detail = "rerun unavailable: " + std::string(e.what());
      return;
    }
    v.backward_agreement = false;
    v.backward_detail = "rephrased question failed: " + std::string(e.what());
  }
}

}  // namespace

Answer answer(const std::string& question, const tree::HOTree& tree_in, const gateway::Gateway* gw,
              const AnswerOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  Answer a;
  auto finish = [&]() -> Answer {
    a.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return a;
  };
  const tree::HOTree t = needs_tagging(tree_in) ? tag_field_types(tree_in, options.tagging) : tree_in;
  try {
    if (text::trim(question).empty()) fail(ErrorCode::UndecomposableQuestion, "the question is empty");
    a.plan = decompose_with(question, t, gw, options.decomposer);
  } catch (const Error& e) {
    a.error = e.code();
    a.text = "Unable to answer: " + std::string(e.what());
    return finish();
  }
  Execution exec;
  try {
    exec = execute_plan(*a.plan, t);
  } catch (const Error& e) {
    a.error = e.code();
    a.text = "Unable to answer: " + std::string(e.what());
    return finish();
  }
  a.trace = exec.trace;
  a.verification.forward_checks = forward_verify(*a.plan, exec, t);
  if (!exec.result) {
    try {
      raise_on_failure(exec);
    } catch (const Error& e) {
      a.error = e.code();
      a.text = "Unable to answer: " + std::string(e.what());
    }
    return finish();
  }
  a.raw = op_result_json(*exec.result);
  if (options.backward) {
    backward_verify(question, *exec.result, t, gw, options, a.verification);
  } else {
    a.verification.backward_detail = "backward verification disabled";
  }
  a.confidence = confidence(a.verification);
  a.text = render_result(*exec.result, t, *a.plan, exec);
  return finish();
}

}  // namespace straptor::qa
