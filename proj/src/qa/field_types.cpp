#include <set>

#include "common/text.hpp"
#include "qa/qa.hpp"
#include "tree/numeric.hpp"

namespace straptor::qa {

using tree::FieldType;
using tree::HOTree;
using tree::NodeKind;

FieldType infer_field_type(const std::vector<std::string>& values, const FieldTagConfig& cfg) {
  if (values.empty()) return FieldType::FreeText;
  std::size_t numeric = 0;
  std::set<std::string> distinct;
  for (const auto& v : values) {
    if (tree::parse_number(v)) ++numeric;
    distinct.insert(text::to_lower(text::collapse_whitespace(v)));
  }
  const auto n = static_cast<double>(values.size());
  if (static_cast<double>(numeric) >= cfg.numeric_ratio * n - 1e-12) return FieldType::Numerical;
  const double ratio = static_cast<double>(distinct.size()) / n;
  const bool repeats = distinct.size() < values.size();
  if (ratio <= cfg.distinct_ratio + 1e-12 || (distinct.size() <= cfg.distinct_cap && repeats))
    return FieldType::Categorical;
  return FieldType::FreeText;
}

namespace {

std::vector<std::string> body_children(const HOTree& t, const tree::HONode& n) {
  std::vector<std::string> out;
  for (const auto& c : n.children) {
    const auto& child = t.node(c);
    if (child.kind == NodeKind::Body) out.push_back(child.label);
  }
  return out;
}

}  // namespace

HOTree tag_field_types(const HOTree& t, const FieldTagConfig& cfg, bool overwrite) {
  HOTree out = t;
  for (auto& [id, n] : out.nodes) {
    if (n.kind != NodeKind::Meta) continue;
    if (n.field_type && !overwrite) continue;
    auto values = body_children(t, t.node(id));
    if (values.empty()) continue;
    n.field_type = infer_field_type(values, cfg);
  }
  return out;
}

bool needs_tagging(const HOTree& t) {
  for (const auto& [_, n] : t.nodes)
    if (n.kind == NodeKind::Meta && !n.field_type && !body_children(t, n).empty()) return true;
  return false;
}

}  // namespace straptor::qa
