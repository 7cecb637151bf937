#include "qa/lower.hpp"

#include <cmath>

#include "common/text.hpp"

namespace straptor::qa::detail {

using tree::OpResult;
using tree::Value;

namespace {

[[noreturn]] void invalid(const SubOperation& s, const std::string& msg) {
  fail(ErrorCode::InvalidPlan, "step " + std::to_string(s.id) + " (" + s.op + "): " + msg);
}

bool is_ref(const json& j) { return j.is_object() && j.size() == 1 && j.contains("ref"); }

std::string literal_text(const SubOperation& s, const json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  if (j.is_number()) return text::shortest_decimal(j.get<double>());
  if (j.is_boolean()) return j.get<bool>() ? "true" : "false";
  invalid(s, "expected a literal, got " + j.dump());
}

const OpResult& referenced(const SubOperation& s, const json& j, const std::vector<OpResult>& outputs) {
  const auto k = j["ref"].get<long long>();
  if (k < 0 || static_cast<std::size_t>(k) >= outputs.size())
    fail(ErrorCode::InvalidPlan, "step " + std::to_string(s.id) + " references step " + std::to_string(k) +
                                     " which produced no output");
  return outputs[static_cast<std::size_t>(k)];
}

class Lowerer {
 public:
  Lowerer(const SubOperation& s, const std::vector<OpResult>& outputs, const tree::HOTree& t)
      : s_(s), outputs_(outputs), t_(t) {}

  const json& arg(const char* name) const {
    if (!s_.args.contains(name)) invalid(s_, std::string("missing argument '") + name + "'");
    return s_.args[name];
  }

  std::vector<std::string> nodes(const json& j) const {
    std::vector<std::string> out;
    add_nodes(j, out);
    return out;
  }

  std::vector<Value> values(const json& j) const {
    std::vector<Value> out;
    add_values(j, out);
    return out;
  }

  Value single(const json& j) const {
    if (!is_ref(j)) return Value::literal(literal_text(s_, j));
    const auto& r = referenced(s_, j, outputs_);
    if (r.kind == OpResult::Kind::Scalar) return r.scalar;
    if (r.kind == OpResult::Kind::Boolean) return Value::literal(r.boolean ? "true" : "false");
    auto vs = values(j);
    if (vs.size() != 1)
      fail(ErrorCode::TypeMismatch, "expected a single value from step " + j["ref"].dump() + ", got " +
                                        std::to_string(vs.size()));
    return vs.front();
  }

  std::string string_arg(const char* name) const { return literal_text(s_, arg(name)); }

 private:
  void add_nodes(const json& j, std::vector<std::string>& out) const {
    if (j.is_array()) {
      for (const auto& e : j) add_nodes(e, out);
    } else if (is_ref(j)) {
      const auto& r = referenced(s_, j, outputs_);
      if (r.kind == OpResult::Kind::NodeSet) {
        out.insert(out.end(), r.nodes.begin(), r.nodes.end());
      } else if (r.kind == OpResult::Kind::ValueList) {
        for (const auto& v : r.values) {
          if (v.source.empty()) fail(ErrorCode::TypeMismatch, "value '" + v.text + "' is not a tree node");
          out.push_back(v.source);
        }
      } else {
        fail(ErrorCode::TypeMismatch, "step " + j["ref"].dump() + " produced a value, not nodes");
      }
    } else if (j.is_string()) {
      const auto id = j.get<std::string>();
      out.push_back(id == "$root" ? t_.root : id);
    } else {
      invalid(s_, "expected node ids, got " + j.dump());
    }
  }

  void add_values(const json& j, std::vector<Value>& out) const {
    if (j.is_array()) {
      for (const auto& e : j) add_values(e, out);
    } else if (is_ref(j)) {
      const auto& r = referenced(s_, j, outputs_);
      switch (r.kind) {
        case OpResult::Kind::NodeSet:
          for (const auto& id : r.nodes) out.push_back(Value{t_.node(id).label, std::nullopt, id});
          break;
        case OpResult::Kind::ValueList: out.insert(out.end(), r.values.begin(), r.values.end()); break;
        case OpResult::Kind::Scalar: out.push_back(r.scalar); break;
        case OpResult::Kind::Boolean: out.push_back(Value::literal(r.boolean ? "true" : "false")); break;
      }
    } else {
      out.push_back(Value::literal(literal_text(s_, j)));
    }
  }

  const SubOperation& s_;
  const std::vector<OpResult>& outputs_;
  const tree::HOTree& t_;
};

tree::Direction direction_of(const SubOperation& s) {
  if (!s.args.contains("direction")) return tree::Direction::TopDown;
  auto d = s.args["direction"].is_string() ? tree::parse_direction(text::to_lower(s.args["direction"].get<std::string>()))
                                            : std::nullopt;
  if (!d) invalid(s, "direction must be top_down or bottom_up");
  return *d;
}

tree::Relation relation_of(const SubOperation& s) {
  const auto& j = s.args["relation"];
  if (j.is_string()) {
    static const std::map<std::string, tree::Relation> kSymbols = {
        {"<", tree::Relation::Lt}, {"<=", tree::Relation::Le}, {"=", tree::Relation::Eq}, {"==", tree::Relation::Eq},
        {">=", tree::Relation::Ge}, {">", tree::Relation::Gt}, {"!=", tree::Relation::Ne}};
    const auto s_text = text::to_lower(text::trim(j.get<std::string>()));
    if (auto it = kSymbols.find(s_text); it != kSymbols.end()) return it->second;
    if (auto r = tree::parse_relation(s_text)) return *r;
  }
  invalid(s, "unknown relation " + j.dump());
}

tree::AggregateFn fn_of(const SubOperation& s) {
  const auto& j = s.args["fn"];
  if (j.is_string()) {
    auto name = text::to_lower(text::trim(j.get<std::string>()));
    if (name == "average" || name == "mean") name = "avg";
    if (name == "total") name = "sum";
    if (auto f = tree::parse_aggregate_fn(name)) return *f;
  }
  invalid(s, "unknown aggregate function " + j.dump());
}

tree::SortOrder order_of(const SubOperation& s) {
  if (!s.args.contains("order")) return tree::SortOrder::Desc;
  const auto& j = s.args["order"];
  if (j.is_string())
    if (auto o = tree::parse_sort_order(text::to_lower(j.get<std::string>()))) return *o;
  invalid(s, "order must be asc or desc");
}

}  // namespace

std::vector<long long> refs_of(const json& j) {
  std::vector<long long> out;
  if (is_ref(j)) {
    if (j["ref"].is_number_integer()) out.push_back(j["ref"].get<long long>());
  } else if (j.is_object() || j.is_array()) {
    for (const auto& v : j) {
      auto sub = refs_of(v);
      out.insert(out.end(), sub.begin(), sub.end());
    }
  }
  return out;
}

void check_literals(const SubOperation& s) {
  if (s.op == "locate") {
    direction_of(s);
    if (!s.args["key"].is_string()) invalid(s, "key must be a string");
  }
  if (s.op == "filter" || s.op == "compare") relation_of(s);
  if (s.op == "aggregate") fn_of(s);
  if (s.op == "top_k") {
    order_of(s);
    const auto& k = s.args["k"];
    if (!is_ref(k) && !(k.is_number_integer() && k.get<long long>() >= 0)) invalid(s, "k must be a non-negative integer");
  }
  if ((s.op == "filter" || s.op == "project") && !s.args["header"].is_string())
    invalid(s, "header must be a string");
}

tree::TreeOperation lower_step(const SubOperation& s, const std::vector<OpResult>& outputs, const tree::HOTree& t) {
  check_literals(s);
  Lowerer l(s, outputs, t);
  if (s.op == "locate") return tree::LocateOp{l.string_arg("key"), direction_of(s)};
  if (s.op == "children") return tree::ChildrenOp{l.nodes(l.arg("nodes"))};
  if (s.op == "parent_chain") return tree::ParentChainOp{l.nodes(l.arg("nodes"))};
  if (s.op == "subtree") return tree::SubtreeOp{l.nodes(l.arg("nodes"))};
  if (s.op == "filter")
    return tree::FilterOp{l.nodes(l.arg("nodes")),
                          tree::Predicate{l.string_arg("header"), relation_of(s), l.single(l.arg("operand"))}};
  if (s.op == "project") return tree::ProjectOp{l.nodes(l.arg("nodes")), l.string_arg("header")};
  if (s.op == "aggregate") return tree::AggregateOp{l.values(l.arg("values")), fn_of(s)};
  if (s.op == "compare") return tree::CompareOp{l.single(l.arg("left")), l.single(l.arg("right")), relation_of(s)};
  if (s.op == "top_k") {
    std::size_t k = 0;
    const auto& kj = l.arg("k");
    if (kj.is_number_integer()) {
      k = kj.get<std::size_t>();
    } else {
      auto x = l.single(kj).as_number();
      if (!x || *x < 0 || std::floor(*x) != *x) fail(ErrorCode::TypeMismatch, "k must be a non-negative integer");
      k = static_cast<std::size_t>(*x);
    }
    return tree::TopKOp{l.values(l.arg("values")), k, order_of(s)};
  }
  invalid(s, "unknown operation");
}

json value_json(const Value& v) {
  json j{{"text", v.text}};
  if (!v.source.empty()) j["source"] = v.source;
  if (auto x = v.as_number()) j["number"] = *x;
  return j;
}

json op_json(const tree::TreeOperation& op) {
  auto values = [](const std::vector<Value>& vs) {
    json a = json::array();
    for (const auto& v : vs) a.push_back(value_json(v));
    return a;
  };
  return std::visit(
      [&](const auto& o) -> json {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, tree::LocateOp>) {
          return {{"key", o.key}, {"direction", tree::to_string(o.direction)}};
        } else if constexpr (std::is_same_v<T, tree::ChildrenOp> || std::is_same_v<T, tree::ParentChainOp> ||
                             std::is_same_v<T, tree::SubtreeOp>) {
          return {{"nodes", o.nodes}};
        } else if constexpr (std::is_same_v<T, tree::FilterOp>) {
          return {{"nodes", o.nodes},
                  {"header", o.predicate.header_label},
                  {"relation", tree::to_string(o.predicate.relation)},
                  {"operand", value_json(o.predicate.operand)}};
        } else if constexpr (std::is_same_v<T, tree::ProjectOp>) {
          return {{"nodes", o.subtree_roots}, {"header", o.header_label}};
        } else if constexpr (std::is_same_v<T, tree::AggregateOp>) {
          return {{"values", values(o.values)}, {"fn", tree::to_string(o.fn)}};
        } else if constexpr (std::is_same_v<T, tree::CompareOp>) {
          return {{"left", value_json(o.left)}, {"right", value_json(o.right)}, {"relation", tree::to_string(o.relation)}};
        } else {
          return {{"values", values(o.values)}, {"k", o.k}, {"order", tree::to_string(o.order)}};
        }
      },
      op);
}

}  // namespace straptor::qa::detail
