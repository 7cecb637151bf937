#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "tree/hotree.hpp"

namespace straptor::tree {

struct RenameEdit {
  std::string node;
  std::string new_label;
};
struct DeleteEdit {
  std::string node;
};
struct CreateChildEdit {
  std::string parent;
  std::string label;
  NodeKind kind = NodeKind::Meta;
  std::string id;  // optional; generated when empty
};
struct MoveEdit {
  std::string node;
  std::string new_parent;
  std::size_t position = 0;  // clamped to the child count
};
struct SetFieldTypeEdit {
  std::string node;
  std::optional<FieldType> field_type;
};

using TreeEditOp = std::variant<RenameEdit, DeleteEdit, CreateChildEdit, MoveEdit, SetFieldTypeEdit>;

// Wire form: {"op": "rename" | "delete" | "create_child" | "move" | "set_field_type", ...}.
// Throws InvalidEdit on malformed objects.
nlohmann::json edit_to_json(const TreeEditOp& edit);
TreeEditOp edit_from_json(const nlohmann::json& j);
std::vector<TreeEditOp> edits_from_json(const nlohmann::json& j);

// All-or-nothing. Errors: NodeNotFound, CycleCreated, RootDeletion, and
// InvalidEdit for edits that would break a tree invariant (duplicate id,
// moving the root, a second Root, field types on non-Meta nodes, Body nodes
// left without a Meta ancestor). The input tree is never modified.
HOTree apply_edits(const HOTree& tree, const std::vector<TreeEditOp>& edits);

}  // namespace straptor::tree
