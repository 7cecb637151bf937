#include "tree/hotree.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>

#include "common/error.hpp"

namespace straptor::tree {

std::string_view to_string(NodeKind kind) noexcept {
  switch (kind) {
    case NodeKind::Root: return "root";
    case NodeKind::Meta: return "meta";
    case NodeKind::Body: return "body";
  }
  return "body";
}

std::string_view to_string(FieldType type) noexcept {
  switch (type) {
    case FieldType::Numerical: return "numerical";
    case FieldType::Categorical: return "categorical";
    case FieldType::FreeText: return "free_text";
  }
  return "free_text";
}

std::optional<NodeKind> parse_node_kind(std::string_view s) noexcept {
  if (s == "root") return NodeKind::Root;
  if (s == "meta") return NodeKind::Meta;
  if (s == "body") return NodeKind::Body;
  return std::nullopt;
}

std::optional<FieldType> parse_field_type(std::string_view s) noexcept {
  if (s == "numerical") return FieldType::Numerical;
  if (s == "categorical") return FieldType::Categorical;
  if (s == "free_text") return FieldType::FreeText;
  return std::nullopt;
}

const HONode& HOTree::node(const std::string& node_id) const {
  auto it = nodes.find(node_id);
  if (it == nodes.end()) fail(ErrorCode::NodeNotFound, "no node with id '" + node_id + "'");
  return it->second;
}

std::size_t HOTree::count(NodeKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [&](const auto& kv) { return kv.second.kind == kind; }));
}

TreeView::TreeView(const HOTree& tree) : tree_(tree) {
  if (!tree.contains(tree.root)) return;
  std::vector<std::string> stack{tree.root};
  std::set<std::string> seen;
  while (!stack.empty()) {
    auto id = std::move(stack.back());
    stack.pop_back();
    if (!seen.insert(id).second) continue;
    order_[id] = preorder_.size();
    preorder_.push_back(id);
    auto it = tree.nodes.find(id);
    if (it == tree.nodes.end()) continue;
    const auto& kids = it->second.children;
    for (auto k = kids.rbegin(); k != kids.rend(); ++k) {
      if (!parent_.count(*k)) parent_[*k] = id;
      stack.push_back(*k);
    }
  }
}

const std::string& TreeView::parent(const std::string& id) const {
  static const std::string kNone;
  auto it = parent_.find(id);
  return it == parent_.end() ? kNone : it->second;
}

std::size_t TreeView::preorder_index(const std::string& id) const {
  auto it = order_.find(id);
  return it == order_.end() ? preorder_.size() : it->second;
}

std::vector<std::string> TreeView::ancestors(const std::string& id) const {
  std::vector<std::string> out;
  for (auto p = parent(id); !p.empty(); p = parent(p)) out.push_back(p);
  return out;
}

bool TreeView::is_ancestor(const std::string& ancestor, const std::string& id) const {
  for (auto p = parent(id); !p.empty(); p = parent(p))
    if (p == ancestor) return true;
  return false;
}

std::vector<std::string> TreeView::subtree(const std::string& id) const {
  std::vector<std::string> out;
  std::vector<std::string> stack{id};
  while (!stack.empty()) {
    auto cur = std::move(stack.back());
    stack.pop_back();
    out.push_back(cur);
    const auto& kids = node(cur).children;
    for (auto k = kids.rbegin(); k != kids.rend(); ++k) stack.push_back(*k);
  }
  return out;
}

std::string TreeView::header_of(const std::string& id) const {
  for (auto p = parent(id); !p.empty(); p = parent(p))
    if (node(p).kind == NodeKind::Meta) return p;
  return {};
}

bool TreeView::document_before(const std::string& a, const std::string& b) const {
  const auto& na = node(a);
  const auto& nb = node(b);
  if (na.origin && nb.origin) {
    if (na.origin->row != nb.origin->row) return na.origin->row < nb.origin->row;
    if (na.origin->col != nb.origin->col) return na.origin->col < nb.origin->col;
  } else if (na.origin != nb.origin) {
    return na.origin.has_value();
  }
  return preorder_index(a) < preorder_index(b);
}

void TreeView::sort_document_order(std::vector<std::string>& ids) const {
  std::stable_sort(ids.begin(), ids.end(), [&](const auto& a, const auto& b) { return document_before(a, b); });
}

void validate(const HOTree& tree) {
  auto violation = [](const std::string& msg) { fail(ErrorCode::StructureViolation, msg); };
  if (!tree.contains(tree.root)) violation("root '" + tree.root + "' is not a node of the tree");
  if (tree.node(tree.root).kind != NodeKind::Root) violation("root node must have kind root");

  std::map<std::string, std::string> parent;
  for (const auto& [id, n] : tree.nodes) {
    if (n.id != id) violation("node key '" + id + "' does not match its id '" + n.id + "'");
    if (n.kind == NodeKind::Root && id != tree.root) violation("more than one root node ('" + id + "')");
    if (n.field_type && n.kind != NodeKind::Meta) violation("field_type on non-meta node '" + id + "'");
    std::set<std::string> local;
    for (const auto& c : n.children) {
      if (!tree.contains(c)) violation("node '" + id + "' lists unknown child '" + c + "'");
      if (c == tree.root) violation("root listed as a child of '" + id + "'");
      if (!local.insert(c).second) violation("node '" + id + "' lists child '" + c + "' twice");
      if (auto [it, fresh] = parent.emplace(c, id); !fresh)
        violation("node '" + c + "' has two parents ('" + it->second + "', '" + id + "')");
    }
  }
  // Single parents + root without parent: every node reachable from the root
  // means the links form a tree; anything unreachable sits on a cycle or a
  // detached fragment.
  std::set<std::string> seen;
  std::vector<std::string> stack{tree.root};
  while (!stack.empty()) {
    auto id = std::move(stack.back());
    stack.pop_back();
    if (!seen.insert(id).second) violation("cycle through node '" + id + "'");
    for (const auto& c : tree.node(id).children) stack.push_back(c);
  }
  if (seen.size() != tree.nodes.size()) {
    for (const auto& [id, _] : tree.nodes)
      if (!seen.count(id)) violation("node '" + id + "' is unreachable from the root (cycle or detached)");
  }
}

std::set<std::string> unlinked_body_nodes(const HOTree& tree) {
  std::set<std::string> out;
  TreeView view(tree);
  for (const auto& [id, n] : tree.nodes)
    if (n.kind == NodeKind::Body && view.header_of(id).empty()) out.insert(id);
  return out;
}

std::string utc_timestamp_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace straptor::tree
