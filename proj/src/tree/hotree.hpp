#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace straptor::tree {

enum class NodeKind { Root, Meta, Body };
enum class FieldType { Numerical, Categorical, FreeText };

std::string_view to_string(NodeKind kind) noexcept;
std::string_view to_string(FieldType type) noexcept;
std::optional<NodeKind> parse_node_kind(std::string_view s) noexcept;
std::optional<FieldType> parse_field_type(std::string_view s) noexcept;

// Grid rectangle a node was built from.
struct Origin {
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t row_span = 1;
  std::size_t col_span = 1;

  std::size_t row_end() const { return row + row_span; }
  std::size_t col_end() const { return col + col_span; }
  bool operator==(const Origin&) const = default;
};

struct HONode {
  std::string id;
  NodeKind kind = NodeKind::Body;
  std::string label;
  std::optional<FieldType> field_type;  // Meta nodes only
  std::vector<std::string> children;
  std::optional<Origin> origin;

  bool operator==(const HONode&) const = default;
};

struct TreeSource {
  std::string file;
  std::string sheet;
  bool operator==(const TreeSource&) const = default;
};

// Meta nodes form the header tree, Body nodes the content tree, all under a
// single Root. Values of this type are treated as immutable once built; edits
// produce a new tree.
struct HOTree {
  std::string id;
  std::string title;
  std::string root;
  std::map<std::string, HONode> nodes;
  TreeSource source;
  std::string created_at;  // ISO-8601 UTC

  const HONode& node(const std::string& node_id) const;  // throws NodeNotFound
  bool contains(const std::string& node_id) const { return nodes.count(node_id) > 0; }
  std::size_t count(NodeKind kind) const;

  bool operator==(const HOTree&) const = default;
};

// Parent links, preorder and document order, computed once per tree value.
class TreeView {
 public:
  explicit TreeView(const HOTree& tree);

  const HOTree& tree() const { return tree_; }
  const HONode& node(const std::string& id) const { return tree_.node(id); }
  // Empty for the root.
  const std::string& parent(const std::string& id) const;
  const std::vector<std::string>& preorder() const { return preorder_; }
  std::size_t preorder_index(const std::string& id) const;

  // Ancestors from the parent up to and including the root.
  std::vector<std::string> ancestors(const std::string& id) const;
  bool is_ancestor(const std::string& ancestor, const std::string& id) const;
  // The node and all of its descendants, preorder.
  std::vector<std::string> subtree(const std::string& id) const;
  // Nearest Meta ancestor, or empty.
  std::string header_of(const std::string& id) const;

  // Origin row-major first, nodes without origin after in preorder.
  bool document_before(const std::string& a, const std::string& b) const;
  void sort_document_order(std::vector<std::string>& ids) const;

 private:
  const HOTree& tree_;
  std::map<std::string, std::string> parent_;
  std::map<std::string, std::size_t> order_;
  std::vector<std::string> preorder_;
};

// Structural invariants: single Root, tree-shaped links, reachable nodes,
// unique ids, field types on Meta nodes only. Throws StructureViolation.
void validate(const HOTree& tree);

// Body nodes without any Meta ancestor. Built trees may contain such nodes
// only for header-less grids; edits must not introduce new ones.
std::set<std::string> unlinked_body_nodes(const HOTree& tree);

std::string utc_timestamp_now();

}  // namespace straptor::tree
