#include <algorithm>
#include <cmath>

#include "common/text.hpp"
#include "qa/lower.hpp"
#include "qa/qa.hpp"
#include "tree/numeric.hpp"

namespace straptor::qa {

using tree::OpResult;
using tree::Value;

std::size_t VerificationReport::forward_passed() const {
  return static_cast<std::size_t>(
      std::count_if(forward_checks.begin(), forward_checks.end(), [](const auto& c) { return c.passed; }));
}

json VerificationReport::to_json() const {
  json checks = json::array();
  for (const auto& c : forward_checks) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  return {{"forward_checks", checks},
          {"forward_passed", forward_passed()},
          {"backward_agreement", backward_agreement ? json(*backward_agreement) : json(nullptr)},
          {"rephrased_question", rephrased_question ? json(*rephrased_question) : json(nullptr)},
          {"backward_detail", backward_detail}};
}

double confidence(const VerificationReport& v) {
  const double forward = v.forward_checks.empty()
                             ? 0.0
                             : static_cast<double>(v.forward_passed()) / static_cast<double>(v.forward_checks.size());
  const double backward = !v.backward_agreement ? 0.5 : (*v.backward_agreement ? 1.0 : 0.0);
  return 0.5 * forward + 0.5 * backward;
}

namespace {

bool ordering(tree::Relation r) { return r != tree::Relation::Eq && r != tree::Relation::Ne; }

// Steps that ran or were attempted, with their lowered operation when the
// inputs could still be resolved.
struct Attempt {
  const SubOperation* step;
  std::optional<tree::TreeOperation> op;
  const OpResult* output;
};

std::vector<Attempt> attempts(const Plan& plan, const Execution& exec, const tree::HOTree& t) {
  std::vector<Attempt> out;
  const auto ran = exec.outputs.size();
  const auto last = exec.trace.failure ? ran + 1 : ran;
  for (std::size_t i = 0; i < std::min(last, plan.steps.size()); ++i) {
    Attempt a{&plan.steps[i], std::nullopt, i < ran ? &exec.outputs[i] : nullptr};
    try {
      a.op = detail::lower_step(plan.steps[i], exec.outputs, t);
    } catch (const Error&) {
    }
    out.push_back(std::move(a));
  }
  return out;
}

std::string numeric_problem(const Value& v, const tree::TreeView& view) {
  if (v.source.empty()) return v.as_number() ? "" : "literal '" + v.text + "' is not numeric";
  if (!view.tree().contains(v.source)) return "source " + v.source + " is not in the tree";
  const auto header = view.header_of(v.source);
  if (header.empty()) return "value '" + v.text + "' has no header";
  const auto& h = view.node(header);
  if (h.field_type != tree::FieldType::Numerical)
    return "'" + h.label + "' is " + (h.field_type ? std::string(tree::to_string(*h.field_type)) : "untagged") +
           ", not numerical";
  return "";
}

ForwardCheck type_consistency(const std::vector<Attempt>& as, const tree::TreeView& view) {
  ForwardCheck c{"type_consistency", true, "arithmetic inputs come from numerical fields"};
  for (const auto& a : as) {
    if (!a.op) continue;
    std::vector<Value> inputs;
    if (auto* agg = std::get_if<tree::AggregateOp>(&*a.op)) {
      if (agg->fn != tree::AggregateFn::Count) inputs = agg->values;
    } else if (auto* top = std::get_if<tree::TopKOp>(&*a.op)) {
      inputs = top->values;
    } else if (auto* cmp = std::get_if<tree::CompareOp>(&*a.op)) {
      if (ordering(cmp->relation)) inputs = {cmp->left, cmp->right};
    }
    for (const auto& v : inputs) {
      auto problem = numeric_problem(v, view);
      if (!problem.empty()) {
        return {c.name, false, "step " + std::to_string(a.step->id) + " (" + a.step->op + "): " + problem};
      }
    }
  }
  return c;
}

ForwardCheck non_empty_retrieval(const std::vector<Attempt>& as) {
  for (const auto& a : as) {
    if (a.step->op != "locate" && a.step->op != "project") continue;
    if (!a.output || a.output->empty())
      return {"non_empty_retrieval", false,
              "step " + std::to_string(a.step->id) + " (" + a.step->op + ") retrieved nothing"};
  }
  return {"non_empty_retrieval", true, "every locate/project step retrieved at least one result"};
}

ForwardCheck trace_completeness(const Plan& plan, const Execution& exec) {
  const auto n = exec.trace.steps.size();
  const bool ok = n == plan.steps.size() && !exec.trace.failure;
  return {"trace_completeness", ok, std::to_string(n) + " of " + std::to_string(plan.steps.size()) + " steps recorded"};
}

ForwardCheck reference_integrity(const Plan& plan, const Execution& exec, const tree::HOTree& t) {
  const std::string name = "reference_integrity";
  for (const auto& s : plan.steps) {
    if (s.id >= exec.trace.steps.size() + (exec.trace.failure ? 1 : 0)) break;
    for (auto r : detail::refs_of(s.args))
      if (r < 0 || static_cast<std::size_t>(r) >= s.id || static_cast<std::size_t>(r) >= exec.outputs.size())
        return {name, false, "step " + std::to_string(s.id) + " consumes step " + std::to_string(r) + ", never produced"};
  }
  for (const auto& id : exec.trace.retrieval_path)
    if (!t.contains(id)) return {name, false, "retrieval path names unknown node " + id};
  for (const auto& out : exec.outputs) {
    for (const auto& id : out.nodes)
      if (!t.contains(id)) return {name, false, "output names unknown node " + id};
    for (const auto& v : out.values)
      if (!v.source.empty() && !t.contains(v.source)) return {name, false, "value source " + v.source + " is unknown"};
  }
  return {name, true, "every consumed value was produced by an earlier step"};
}

ForwardCheck range_sanity(const std::vector<Attempt>& as) {
  const std::string name = "range_sanity";
  for (const auto& a : as) {
    if (!a.op || !a.output) continue;
    auto* agg = std::get_if<tree::AggregateOp>(&*a.op);
    if (!agg || agg->fn != tree::AggregateFn::Avg) continue;
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& v : agg->values) {
      auto x = v.as_number();
      if (!x) return {name, false, "average over non-numeric input"};
      lo = std::min(lo, *x);
      hi = std::max(hi, *x);
    }
    const auto avg = a.output->scalar.as_number();
    const double tol = 1e-9 * std::max({1.0, std::fabs(lo), std::fabs(hi)});
    if (!avg || *avg < lo - tol || *avg > hi + tol)
      return {name, false, "step " + std::to_string(a.step->id) + ": average " + a.output->scalar.text +
                               " lies outside [" + text::display_number(lo) + ", " + text::display_number(hi) + "]"};
  }
  return {name, true, "averages lie within the range of their inputs"};
}

std::vector<Value> flatten(const OpResult& r) {
  switch (r.kind) {
    case OpResult::Kind::NodeSet: {
      std::vector<Value> out;
      for (const auto& id : r.nodes) out.push_back(Value::literal(id));
      return out;
    }
    case OpResult::Kind::ValueList: return r.values;
    case OpResult::Kind::Scalar: return {r.scalar};
    case OpResult::Kind::Boolean: return {Value::literal(r.boolean ? "true" : "false")};
  }
  return {};
}

bool values_agree(const Value& a, const Value& b, double rel_tol) {
  const auto x = a.as_number();
  const auto y = b.as_number();
  if (x && y) return std::fabs(*x - *y) <= rel_tol * std::max(std::fabs(*x), std::fabs(*y)) || *x == *y;
  return text::to_lower(text::collapse_whitespace(a.text)) == text::to_lower(text::collapse_whitespace(b.text));
}

}  // namespace

std::vector<ForwardCheck> forward_verify(const Plan& plan, const Execution& exec, const tree::HOTree& t) {
  const tree::TreeView view(t);
  const auto as = attempts(plan, exec, t);
  return {type_consistency(as, view), non_empty_retrieval(as), trace_completeness(plan, exec),
          reference_integrity(plan, exec, t), range_sanity(as)};
}

bool answers_agree(const OpResult& a, const OpResult& b, double rel_tol) {
  auto xs = flatten(a);
  auto ys = flatten(b);
  if (xs.size() != ys.size()) return false;
  // Order-insensitive multiset match.
  std::vector<bool> used(ys.size(), false);
  for (const auto& x : xs) {
    bool found = false;
    for (std::size_t j = 0; j < ys.size() && !found; ++j)
      if (!used[j] && values_agree(x, ys[j], rel_tol)) found = used[j] = true;
    if (!found) return false;
  }
  return true;
}

bool answer_texts_agree(const std::string& a, const std::string& b, double rel_tol) {
  const auto as_result = [](const std::string& s) {
    OpResult r;
    r.kind = OpResult::Kind::ValueList;
    if (tree::parse_number(s)) {
      r.values.push_back(Value::literal(std::string(text::trim(s))));
      return r;
    }
    for (const auto& part : text::split(s, ','))
      if (!text::trim(part).empty()) r.values.push_back(Value::literal(std::string(text::trim(part))));
    return r;
  };
  const auto yes_no = [](const std::string& s) {
    const auto l = text::to_lower(text::trim(s));
    return l == "true" ? std::string("yes") : l == "false" ? std::string("no") : l;
  };
  return answers_agree(as_result(yes_no(a)), as_result(yes_no(b)), rel_tol);
}

}  // namespace straptor::qa
