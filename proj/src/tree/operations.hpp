#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tree/hotree.hpp"

namespace straptor::tree {

enum class Direction { TopDown, BottomUp };
enum class Relation { Lt, Le, Eq, Ge, Gt, Ne };
enum class AggregateFn { Sum, Avg, Min, Max, Count };
enum class SortOrder { Asc, Desc };

std::string_view to_string(Direction d) noexcept;
std::string_view to_string(Relation r) noexcept;
std::string_view to_string(AggregateFn f) noexcept;
std::string_view to_string(SortOrder o) noexcept;
std::optional<Direction> parse_direction(std::string_view s) noexcept;
std::optional<Relation> parse_relation(std::string_view s) noexcept;
std::optional<AggregateFn> parse_aggregate_fn(std::string_view s) noexcept;
std::optional<SortOrder> parse_sort_order(std::string_view s) noexcept;

// A cell value flowing through a plan. `source` names the Body node it was
// read from (empty for literals and computed values).
struct Value {
  std::string text;
  std::optional<double> number;  // set for computed numbers
  std::string source;

  static Value literal(std::string text) { return Value{std::move(text), std::nullopt, {}}; }
  static Value computed(double v);
  std::optional<double> as_number() const;
  bool operator==(const Value&) const = default;
};

struct Predicate {
  std::string header_label;
  Relation relation = Relation::Eq;
  Value operand;
};

struct LocateOp {
  std::string key;
  Direction direction = Direction::TopDown;
};
struct ChildrenOp {
  std::vector<std::string> nodes;
};
struct ParentChainOp {
  std::vector<std::string> nodes;
};
struct SubtreeOp {
  std::vector<std::string> nodes;
};
struct FilterOp {
  std::vector<std::string> nodes;
  Predicate predicate;
};
struct ProjectOp {
  std::vector<std::string> subtree_roots;
  std::string header_label;
};
struct AggregateOp {
  std::vector<Value> values;
  AggregateFn fn = AggregateFn::Count;
};
struct CompareOp {
  Value left;
  Value right;
  Relation relation = Relation::Eq;
};
struct TopKOp {
  std::vector<Value> values;
  std::size_t k = 1;
  SortOrder order = SortOrder::Desc;
};

using TreeOperation = std::variant<LocateOp, ChildrenOp, ParentChainOp, SubtreeOp, FilterOp, ProjectOp,
                                   AggregateOp, CompareOp, TopKOp>;

std::string_view op_name(const TreeOperation& op) noexcept;

struct OpResult {
  enum class Kind { NodeSet, ValueList, Scalar, Boolean };
  Kind kind = Kind::NodeSet;
  std::vector<std::string> nodes;  // NodeSet
  std::vector<Value> values;       // ValueList
  Value scalar;                    // Scalar
  bool boolean = false;            // Boolean
  // Every node the operation touched, in visiting order.
  std::vector<std::string> visited;

  bool empty() const;
};

// Read-only. Nodes named in the operation must exist (NodeNotFound);
// arithmetic over non-numeric text raises TypeMismatch; operations that need
// input raise EmptyInput when handed none. An empty Locate/Project/Filter
// result is a valid result.
OpResult execute_tree_op(const HOTree& tree, const TreeOperation& op);

bool compare_values(const Value& left, const Value& right, Relation relation);

// Layered label matching: exact, then case-insensitive, then substring.
// Returns the matches of the first layer that matches anything.
std::vector<std::string> match_labels(const TreeView& view, const std::vector<std::string>& candidates,
                                      const std::string& key);

}  // namespace straptor::tree
