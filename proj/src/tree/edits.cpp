#include "tree/edits.hpp"

#include <algorithm>

#include "common/error.hpp"

namespace straptor::tree {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& msg) { fail(ErrorCode::InvalidEdit, msg); }

std::string field(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) invalid(std::string("edit field '") + key + "' must be a string");
  return j[key].get<std::string>();
}

struct Applier {
  HOTree& t;
  std::map<std::string, std::string> parent;
  std::size_t next_id = 0;

  explicit Applier(HOTree& tree) : t(tree) {
    for (const auto& [id, n] : t.nodes)
      for (const auto& c : n.children) parent[c] = id;
  }

  HONode& get(const std::string& id) {
    auto it = t.nodes.find(id);
    if (it == t.nodes.end()) fail(ErrorCode::NodeNotFound, "node '" + id + "' not found");
    return it->second;
  }

  void detach(const std::string& id) {
    auto& siblings = get(parent.at(id)).children;
    siblings.erase(std::find(siblings.begin(), siblings.end(), id));
    parent.erase(id);
  }

  void operator()(const RenameEdit& e) { get(e.node).label = e.new_label; }

  void operator()(const DeleteEdit& e) {
    get(e.node);
    if (e.node == t.root) fail(ErrorCode::RootDeletion, "the root node cannot be deleted");
    detach(e.node);
    std::vector<std::string> stack{e.node};
    while (!stack.empty()) {
      auto id = std::move(stack.back());
      stack.pop_back();
      for (const auto& c : get(id).children) {
        parent.erase(c);
        stack.push_back(c);
      }
      t.nodes.erase(id);
    }
  }

  void operator()(const CreateChildEdit& e) {
    auto& p = get(e.parent);
    if (e.kind == NodeKind::Root) invalid("cannot create a second root");
    std::string id = e.id;
    if (id.empty()) {
      do id = "u" + std::to_string(next_id++);
      while (t.nodes.count(id));
    } else if (t.nodes.count(id)) {
      invalid("node id '" + id + "' already exists");
    }
    p.children.push_back(id);
    HONode n;
    n.id = id;
    n.kind = e.kind;
    n.label = e.label;
    t.nodes.emplace(id, std::move(n));
    parent[id] = e.parent;
  }

  void operator()(const MoveEdit& e) {
    get(e.node);
    get(e.new_parent);
    if (e.node == t.root) invalid("the root node cannot be moved");
    for (auto p = e.new_parent; !p.empty();) {
      if (p == e.node) fail(ErrorCode::CycleCreated, "moving '" + e.node + "' under '" + e.new_parent + "' creates a cycle");
      auto it = parent.find(p);
      p = it == parent.end() ? std::string() : it->second;
    }
    detach(e.node);
    auto& children = get(e.new_parent).children;
    const auto pos = std::min(e.position, children.size());
    children.insert(children.begin() + static_cast<std::ptrdiff_t>(pos), e.node);
    parent[e.node] = e.new_parent;
  }

  void operator()(const SetFieldTypeEdit& e) {
    auto& n = get(e.node);
    if (e.field_type && n.kind != NodeKind::Meta) invalid("field types apply to meta nodes only");
    n.field_type = e.field_type;
  }
};

}  // namespace

json edit_to_json(const TreeEditOp& edit) {
  return std::visit(
      [](const auto& e) -> json {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, RenameEdit>) {
          return {{"op", "rename"}, {"node", e.node}, {"new_label", e.new_label}};
        } else if constexpr (std::is_same_v<T, DeleteEdit>) {
          return {{"op", "delete"}, {"node", e.node}};
        } else if constexpr (std::is_same_v<T, CreateChildEdit>) {
          json j{{"op", "create_child"}, {"parent", e.parent}, {"label", e.label}, {"kind", std::string(to_string(e.kind))}};
          if (!e.id.empty()) j["id"] = e.id;
          return j;
        } else if constexpr (std::is_same_v<T, MoveEdit>) {
          return {{"op", "move"}, {"node", e.node}, {"new_parent", e.new_parent}, {"position", e.position}};
        } else {
          return {{"op", "set_field_type"},
                  {"node", e.node},
                  {"field_type", e.field_type ? json(std::string(to_string(*e.field_type))) : json(nullptr)}};
        }
      },
      edit);
}

TreeEditOp edit_from_json(const json& j) {
  if (!j.is_object()) invalid("edit must be an object");
  const auto op = field(j, "op");
  if (op == "rename") return RenameEdit{field(j, "node"), field(j, "new_label")};
  if (op == "delete") return DeleteEdit{field(j, "node")};
  if (op == "create_child") {
    CreateChildEdit e{field(j, "parent"), field(j, "label"), NodeKind::Meta, {}};
    if (j.contains("kind")) {
      auto k = parse_node_kind(field(j, "kind"));
      if (!k) invalid("unknown node kind");
      e.kind = *k;
    }
    if (j.contains("id") && !j["id"].is_null()) e.id = field(j, "id");
    return e;
  }
  if (op == "move") {
    MoveEdit e{field(j, "node"), field(j, "new_parent"), 0};
    if (j.contains("position")) {
      const auto& p = j["position"];
      if (!p.is_number_integer() || p.get<long long>() < 0) invalid("move position must be a non-negative integer");
      e.position = p.get<std::size_t>();
    }
    return e;
  }
  if (op == "set_field_type") {
    SetFieldTypeEdit e{field(j, "node"), std::nullopt};
    if (j.contains("field_type") && !j["field_type"].is_null()) {
      auto ft = parse_field_type(field(j, "field_type"));
      if (!ft) invalid("unknown field type");
      e.field_type = ft;
    }
    return e;
  }
  invalid("unknown edit op '" + op + "'");
}

std::vector<TreeEditOp> edits_from_json(const json& j) {
  if (!j.is_array()) invalid("edits must be an array");
  std::vector<TreeEditOp> out;
  for (const auto& e : j) out.push_back(edit_from_json(e));
  return out;
}

HOTree apply_edits(const HOTree& tree, const std::vector<TreeEditOp>& edits) {
  HOTree next = tree;
  Applier applier(next);
  for (const auto& e : edits) std::visit(applier, e);
  try {
    validate(next);
  } catch (const Error& e) {
    invalid(std::string("edit batch breaks the tree structure: ") + e.what());
  }
  const auto before = unlinked_body_nodes(tree);
  for (const auto& id : unlinked_body_nodes(next))
    if (!before.count(id)) invalid("body node '" + id + "' would have no meta ancestor");
  return next;
}

}  // namespace straptor::tree
