#include "tree/operations.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "common/error.hpp"
#include "common/text.hpp"
#include "tree/numeric.hpp"

namespace straptor::tree {

std::string_view to_string(Direction d) noexcept { return d == Direction::TopDown ? "top_down" : "bottom_up"; }

std::string_view to_string(Relation r) noexcept {
  switch (r) {
    case Relation::Lt: return "lt";
    case Relation::Le: return "le";
    case Relation::Eq: return "eq";
    case Relation::Ge: return "ge";
    case Relation::Gt: return "gt";
    case Relation::Ne: return "ne";
  }
  return "eq";
}

std::string_view to_string(AggregateFn f) noexcept {
  switch (f) {
    case AggregateFn::Sum: return "sum";
    case AggregateFn::Avg: return "avg";
    case AggregateFn::Min: return "min";
    case AggregateFn::Max: return "max";
    case AggregateFn::Count: return "count";
  }
  return "count";
}

std::string_view to_string(SortOrder o) noexcept { return o == SortOrder::Asc ? "asc" : "desc"; }

std::optional<Direction> parse_direction(std::string_view s) noexcept {
  if (s == "top_down") return Direction::TopDown;
  if (s == "bottom_up") return Direction::BottomUp;
  return std::nullopt;
}

std::optional<Relation> parse_relation(std::string_view s) noexcept {
  for (auto r : {Relation::Lt, Relation::Le, Relation::Eq, Relation::Ge, Relation::Gt, Relation::Ne})
    if (to_string(r) == s) return r;
  return std::nullopt;
}

std::optional<AggregateFn> parse_aggregate_fn(std::string_view s) noexcept {
  for (auto f : {AggregateFn::Sum, AggregateFn::Avg, AggregateFn::Min, AggregateFn::Max, AggregateFn::Count})
    if (to_string(f) == s) return f;
  return std::nullopt;
}

std::optional<SortOrder> parse_sort_order(std::string_view s) noexcept {
  if (s == "asc") return SortOrder::Asc;
  if (s == "desc") return SortOrder::Desc;
  return std::nullopt;
}

std::string_view op_name(const TreeOperation& op) noexcept {
  static constexpr std::string_view kNames[] = {"locate", "children", "parent_chain", "subtree", "filter",
                                                "project", "aggregate", "compare", "top_k"};
  return kNames[op.index()];
}

Value Value::computed(double v) { return Value{text::display_number(v), v, {}}; }

std::optional<double> Value::as_number() const { return number ? number : parse_number(text); }

bool OpResult::empty() const {
  switch (kind) {
    case Kind::NodeSet: return nodes.empty();
    case Kind::ValueList: return values.empty();
    default: return false;
  }
}

bool compare_values(const Value& left, const Value& right, Relation relation) {
  const auto a = left.as_number();
  const auto b = right.as_number();
  int cmp = 0;
  if (a && b) {
    const double scale = std::max({1.0, std::fabs(*a), std::fabs(*b)});
    if (std::fabs(*a - *b) <= 1e-12 * scale) cmp = 0;
    else cmp = *a < *b ? -1 : 1;
  } else {
    const auto x = text::to_lower(text::collapse_whitespace(left.text));
    const auto y = text::to_lower(text::collapse_whitespace(right.text));
    cmp = x.compare(y);
    cmp = cmp < 0 ? -1 : (cmp > 0 ? 1 : 0);
  }
  switch (relation) {
    case Relation::Lt: return cmp < 0;
    case Relation::Le: return cmp <= 0;
    case Relation::Eq: return cmp == 0;
    case Relation::Ge: return cmp >= 0;
    case Relation::Gt: return cmp > 0;
    case Relation::Ne: return cmp != 0;
  }
  return false;
}

std::vector<std::string> match_labels(const TreeView& view, const std::vector<std::string>& candidates,
                                      const std::string& key) {
  const auto wanted = text::collapse_whitespace(key);
  std::vector<std::string> out;
  for (int layer = 0; layer < 3 && out.empty(); ++layer) {
    for (const auto& id : candidates) {
      const auto label = text::collapse_whitespace(view.node(id).label);
      const bool hit = layer == 0   ? label == wanted
                       : layer == 1 ? text::iequals(label, wanted)
                                    : (!wanted.empty() && text::icontains(label, wanted));
      if (hit) out.push_back(id);
    }
  }
  view.sort_document_order(out);
  return out;
}

namespace {

struct Range {
  std::size_t begin = std::numeric_limits<std::size_t>::max();
  std::size_t end = 0;
  bool empty() const { return begin >= end; }
  void add(std::size_t b, std::size_t e) {
    begin = std::min(begin, b);
    end = std::max(end, e);
  }
  bool intersects(const Range& o) const { return !empty() && !o.empty() && begin < o.end && o.begin < end; }
};

enum class Axis { Rows, Cols };

class Engine {
 public:
  explicit Engine(const HOTree& tree) : tree_(tree), view_(tree) {}

  OpResult operator()(const LocateOp& op) {
    OpResult r;
    r.kind = OpResult::Kind::NodeSet;
    const auto wanted_kind = op.direction == Direction::TopDown ? NodeKind::Meta : NodeKind::Body;
    std::vector<std::string> candidates;
    for (const auto& id : view_.preorder())
      if (view_.node(id).kind == wanted_kind) candidates.push_back(id);
    r.nodes = match_labels(view_, candidates, op.key);
    for (const auto& id : r.nodes) {
      auto chain = view_.ancestors(id);
      if (op.direction == Direction::TopDown) {
        std::reverse(chain.begin(), chain.end());
        chain.push_back(id);
      } else {
        chain.insert(chain.begin(), id);
      }
      for (auto& c : chain) visit(r, c);
    }
    return r;
  }

  OpResult operator()(const ChildrenOp& op) {
    require_nodes(op.nodes);
    OpResult r;
    for (const auto& id : op.nodes) {
      visit(r, id);
      for (const auto& c : view_.node(id).children) {
        r.nodes.push_back(c);
        visit(r, c);
      }
    }
    return r;
  }

  OpResult operator()(const ParentChainOp& op) {
    require_nodes(op.nodes);
    OpResult r;
    std::set<std::string> seen;
    for (const auto& id : op.nodes) {
      visit(r, id);
      for (const auto& a : view_.ancestors(id)) {
        if (seen.insert(a).second) r.nodes.push_back(a);
        visit(r, a);
      }
    }
    return r;
  }

  OpResult operator()(const SubtreeOp& op) {
    require_nodes(op.nodes);
    OpResult r;
    std::set<std::string> seen;
    for (const auto& id : op.nodes)
      for (const auto& d : view_.subtree(id))
        if (seen.insert(d).second) {
          r.nodes.push_back(d);
          visit(r, d);
        }
    return r;
  }

  OpResult operator()(const FilterOp& op) {
    require_nodes(op.nodes);
    OpResult r;
    const auto headers = all_headers(op.predicate.header_label);
    for (const auto& id : op.nodes) {
      visit(r, id);
      bool keep = false;
      for (const auto& mate : record_mates(id, headers)) {
        visit(r, mate);
        keep = keep || compare_values(Value::literal(view_.node(mate).label), op.predicate.operand,
                                      op.predicate.relation);
      }
      if (keep) r.nodes.push_back(id);
    }
    return r;
  }

  OpResult operator()(const ProjectOp& op) {
    require_nodes(op.subtree_roots);
    OpResult r;
    r.kind = OpResult::Kind::ValueList;
    std::set<std::string> emitted;
    for (const auto& root : op.subtree_roots) {
      visit(r, root);
      std::vector<std::string> values;
      // A matching header inside the subtree: its column slice.
      std::vector<std::string> local;
      for (const auto& id : view_.subtree(root))
        if (view_.node(id).kind == NodeKind::Meta && !below_body(id, root)) local.push_back(id);
      const auto inside = match_labels(view_, local, op.header_label);
      if (!inside.empty()) {
        for (const auto& h : inside) {
          visit(r, h);
          for (auto& v : header_values(h)) values.push_back(std::move(v));
        }
      } else {
        // Otherwise the header lives elsewhere: values of the same record.
        const auto headers = all_headers(op.header_label);
        for (const auto& h : headers) visit(r, h);
        values = record_mates(root, headers);
      }
      for (const auto& v : values) {
        if (!emitted.insert(v).second) continue;
        visit(r, v);
        r.values.push_back(Value{view_.node(v).label, std::nullopt, v});
      }
    }
    return r;
  }

  OpResult operator()(const AggregateOp& op) {
    OpResult r;
    r.kind = OpResult::Kind::Scalar;
    for (const auto& v : op.values)
      if (!v.source.empty()) visit(r, v.source);
    if (op.fn == AggregateFn::Count) {
      r.scalar = Value::computed(static_cast<double>(op.values.size()));
      return r;
    }
    if (op.values.empty()) fail(ErrorCode::EmptyInput, "empty input: cannot " + std::string(to_string(op.fn)) + " zero values");
    std::vector<double> xs;
    for (const auto& v : op.values) {
      auto x = v.as_number();
      if (!x) fail(ErrorCode::TypeMismatch, "'" + v.text + "' is not numeric");
      xs.push_back(*x);
    }
    double out = 0;
    switch (op.fn) {
      case AggregateFn::Sum:
        for (double x : xs) out += x;
        break;
      case AggregateFn::Avg:
        for (double x : xs) out += x;
        out /= static_cast<double>(xs.size());
        break;
      case AggregateFn::Min: out = *std::min_element(xs.begin(), xs.end()); break;
      case AggregateFn::Max: out = *std::max_element(xs.begin(), xs.end()); break;
      case AggregateFn::Count: break;
    }
    r.scalar = Value::computed(out);
    return r;
  }

  OpResult operator()(const CompareOp& op) {
    OpResult r;
    r.kind = OpResult::Kind::Boolean;
    for (const auto* v : {&op.left, &op.right})
      if (!v->source.empty()) visit(r, v->source);
    r.boolean = compare_values(op.left, op.right, op.relation);
    return r;
  }

  OpResult operator()(const TopKOp& op) {
    OpResult r;
    r.kind = OpResult::Kind::ValueList;
    if (op.values.empty()) fail(ErrorCode::EmptyInput, "empty input: top_k over zero values");
    std::vector<std::pair<double, std::size_t>> keyed;
    for (std::size_t i = 0; i < op.values.size(); ++i) {
      auto x = op.values[i].as_number();
      if (!x) fail(ErrorCode::TypeMismatch, "'" + op.values[i].text + "' is not numeric");
      keyed.emplace_back(*x, i);
    }
    std::stable_sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
      return op.order == SortOrder::Asc ? a.first < b.first : a.first > b.first;
    });
    for (std::size_t i = 0; i < std::min(op.k, keyed.size()); ++i) {
      const auto& v = op.values[keyed[i].second];
      if (!v.source.empty()) visit(r, v.source);
      r.values.push_back(v);
    }
    return r;
  }

 private:
  void require_nodes(const std::vector<std::string>& ids) {
    if (ids.empty()) fail(ErrorCode::EmptyInput, "empty input: operation needs at least one node");
    for (const auto& id : ids) tree_.node(id);
  }

  static void visit(OpResult& r, const std::string& id) {
    if (std::find(r.visited.begin(), r.visited.end(), id) == r.visited.end()) r.visited.push_back(id);
  }

  // True when `id` sits inside a nested table, i.e. below a Body node that is
  // itself below `scope`.
  bool below_body(const std::string& id, const std::string& scope) const {
    for (auto p = view_.parent(id); !p.empty() && p != scope; p = view_.parent(p))
      if (view_.node(p).kind == NodeKind::Body) return true;
    return false;
  }

  std::vector<std::string> all_headers(const std::string& label) const {
    std::vector<std::string> metas;
    for (const auto& id : view_.preorder())
      if (view_.node(id).kind == NodeKind::Meta && !below_body(id, tree_.root)) metas.push_back(id);
    return match_labels(view_, metas, label);
  }

  // Body nodes under `header` reached without passing through another Body.
  std::vector<std::string> header_values(const std::string& header) const {
    std::vector<std::string> out;
    std::vector<std::string> stack{header};
    while (!stack.empty()) {
      auto id = std::move(stack.back());
      stack.pop_back();
      const auto& n = view_.node(id);
      if (n.kind == NodeKind::Body) {
        out.push_back(id);
        continue;
      }
      for (auto k = n.children.rbegin(); k != n.children.rend(); ++k) stack.push_back(*k);
    }
    view_.sort_document_order(out);
    return out;
  }

  Axis record_axis(const std::string& header) const {
    const auto& h = view_.node(header);
    if (!h.origin) return Axis::Rows;
    bool in_cols = true, in_rows = true;
    for (const auto& v : header_values(header)) {
      const auto& o = view_.node(v).origin;
      if (!o) continue;
      in_cols = in_cols && o->col < h.origin->col_end() && h.origin->col < o->col_end();
      in_rows = in_rows && o->row < h.origin->row_end() && h.origin->row < o->row_end();
    }
    if (!in_cols && in_rows) return Axis::Cols;
    return Axis::Rows;
  }

  static Range extent(const Origin& o, Axis axis) {
    Range r;
    if (axis == Axis::Rows) r.add(o.row, o.row_end());
    else r.add(o.col, o.col_end());
    return r;
  }

  // Rows (or columns) covered by a node: a Body node's own span, or the union
  // over a Meta node and everything it heads.
  Range key_range(const std::string& id, Axis axis) const {
    Range r;
    for (const auto& d : view_.subtree(id)) {
      if (d != id && below_body(d, id)) continue;
      if (const auto& o = view_.node(d).origin) {
        const auto e = extent(*o, axis);
        r.add(e.begin, e.end);
      }
    }
    return r;
  }

  std::vector<std::string> record_mates(const std::string& id, const std::vector<std::string>& headers) const {
    std::vector<std::string> out;
    for (const auto& h : headers) {
      const auto axis = record_axis(h);
      const auto key = key_range(id, axis);
      for (const auto& v : header_values(h)) {
        if (v == id) {
          out.push_back(v);
          continue;
        }
        const auto& o = view_.node(v).origin;
        if (o && extent(*o, axis).intersects(key)) out.push_back(v);
      }
    }
    return out;
  }

  const HOTree& tree_;
  TreeView view_;
};

}  // namespace

OpResult execute_tree_op(const HOTree& tree, const TreeOperation& op) {
  Engine engine(tree);
  return std::visit(engine, op);
}

}  // namespace straptor::tree
