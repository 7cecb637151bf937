#include <map>
#include <set>

#include "common/text.hpp"
#include "qa/lower.hpp"
#include "qa/qa.hpp"

namespace straptor::qa {

namespace {

[[noreturn]] void invalid(const std::string& msg) { fail(ErrorCode::InvalidPlan, msg); }

const std::map<std::string, std::vector<std::string>>& required_args() {
  static const std::map<std::string, std::vector<std::string>> kArgs = {
      {"locate", {"key"}},
      {"children", {"nodes"}},
      {"parent_chain", {"nodes"}},
      {"subtree", {"nodes"}},
      {"filter", {"nodes", "header", "relation", "operand"}},
      {"project", {"nodes", "header"}},
      {"aggregate", {"values", "fn"}},
      {"compare", {"left", "right", "relation"}},
      {"top_k", {"values", "k"}},
  };
  return kArgs;
}

// Accepts a few spellings models commonly produce.
json normalize_args(const std::string& op, json args) {
  if (!args.is_object()) invalid("step args must be an object");
  auto alias = [&](const char* from, const char* to) {
    if (!args.contains(to) && args.contains(from)) {
      args[to] = args[from];
      args.erase(from);
    }
  };
  alias("node", "nodes");
  if (op == "project") {
    alias("subtree_root", "nodes");
    alias("subtree_roots", "nodes");
    alias("header_label", "header");
  }
  if (op == "filter" && args.contains("predicate") && args["predicate"].is_object()) {
    for (const auto& [k, v] : args["predicate"].items()) args[k == "header_label" ? "header" : k] = v;
    args.erase("predicate");
  }
  if (op == "aggregate") alias("function", "fn");
  return args;
}

void collect_refs(const json& j, std::vector<long long>& out) {
  if (j.is_object()) {
    if (j.size() == 1 && j.contains("ref")) {
      if (!j["ref"].is_number_integer()) invalid("reference index must be an integer");
      out.push_back(j["ref"].get<long long>());
      return;
    }
    for (const auto& [_, v] : j.items()) collect_refs(v, out);
  } else if (j.is_array()) {
    for (const auto& v : j) collect_refs(v, out);
  }
}

}  // namespace

json Plan::to_json() const {
  json steps_json = json::array();
  for (const auto& s : steps) steps_json.push_back({{"id", s.id}, {"op", s.op}, {"args", s.args}, {"note", s.note}});
  return json{{"question", question}, {"tree_id", tree_id}, {"steps", steps_json}};
}

Plan Plan::from_json(const json& j) {
  if (!j.is_object()) invalid("plan must be a JSON object");
  if (!j.contains("steps") || !j["steps"].is_array()) invalid("plan needs a 'steps' array");
  Plan p;
  if (j.contains("question") && j["question"].is_string()) p.question = j["question"].get<std::string>();
  if (j.contains("tree_id") && j["tree_id"].is_string()) p.tree_id = j["tree_id"].get<std::string>();
  for (const auto& s : j["steps"]) {
    if (!s.is_object()) invalid("each step must be an object");
    SubOperation op;
    op.id = p.steps.size();
    if (s.contains("id") && !(s["id"].is_number_integer() && s["id"].get<long long>() == static_cast<long long>(op.id)))
      invalid("step ids must count up from 0");
    if (!s.contains("op") || !s["op"].is_string()) invalid("step " + std::to_string(op.id) + " has no op name");
    op.op = text::to_lower(text::trim(s["op"].get<std::string>()));
    if (op.op == "topk") op.op = "top_k";
    if (op.op == "parentchain") op.op = "parent_chain";
    op.args = normalize_args(op.op, s.value("args", json::object()));
    if (s.contains("note") && s["note"].is_string()) op.note = s["note"].get<std::string>();
    p.steps.push_back(std::move(op));
  }
  validate_plan(p);
  return p;
}

Plan parse_plan_reply(const std::string& reply) {
  const auto b = reply.find('{');
  const auto e = reply.rfind('}');
  if (b == std::string::npos || e == std::string::npos || e < b) invalid("reply contains no JSON object");
  auto j = json::parse(reply.begin() + static_cast<std::ptrdiff_t>(b), reply.begin() + static_cast<std::ptrdiff_t>(e) + 1,
                       nullptr, false);
  if (j.is_discarded()) invalid("reply JSON does not parse");
  return Plan::from_json(j);
}

void validate_plan(const Plan& plan) {
  if (plan.steps.empty()) invalid("plan has no steps");
  for (std::size_t i = 0; i < plan.steps.size(); ++i) {
    const auto& s = plan.steps[i];
    const auto where = "step " + std::to_string(i) + " (" + s.op + ")";
    auto it = required_args().find(s.op);
    if (it == required_args().end()) invalid(where + ": unknown operation");
    if (!s.args.is_object()) invalid(where + ": args must be an object");
    for (const auto& a : it->second)
      if (!s.args.contains(a)) invalid(where + ": missing argument '" + a + "'");
    detail::check_literals(s);
    std::vector<long long> refs;
    collect_refs(s.args, refs);
    for (auto r : refs)
      if (r < 0 || static_cast<std::size_t>(r) >= i)
        invalid(where + ": reference to step " + std::to_string(r) + " does not point to an earlier step");
  }
}

}  // namespace straptor::qa
