#include "tree/serialize.hpp"

#include <set>

#include "common/error.hpp"

namespace straptor::tree {

using nlohmann::json;

namespace {

json origin_json(const std::optional<Origin>& o) {
  if (!o) return nullptr;
  return json{{"row", o->row}, {"col", o->col}, {"row_span", o->row_span}, {"col_span", o->col_span}};
}

[[noreturn]] void schema(const std::string& msg) { fail(ErrorCode::SchemaViolation, msg); }

void expect_keys(const json& obj, const std::set<std::string>& keys, const std::string& where) {
  if (!obj.is_object()) schema(where + ": expected an object");
  for (const auto& k : keys)
    if (!obj.contains(k)) schema(where + ": missing field '" + k + "'");
  for (const auto& [k, _] : obj.items())
    if (!keys.count(k)) schema(where + ": unknown field '" + k + "'");
}

const std::string& str(const json& obj, const char* key, const std::string& where) {
  const auto& v = obj.at(key);
  if (!v.is_string()) schema(where + ": field '" + key + "' must be a string");
  return v.get_ref<const std::string&>();
}

std::size_t count(const json& obj, const char* key, const std::string& where) {
  const auto& v = obj.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    schema(where + ": field '" + key + "' must be a non-negative integer");
  return v.get<std::size_t>();
}

}  // namespace

json to_json(const HOTree& tree) {
  json nodes = json::object();
  for (const auto& [id, n] : tree.nodes) {
    nodes[id] = json{{"id", n.id},
                     {"kind", std::string(to_string(n.kind))},
                     {"label", n.label},
                     {"field_type", n.field_type ? json(std::string(to_string(*n.field_type))) : json(nullptr)},
                     {"children", n.children},
                     {"origin", origin_json(n.origin)}};
  }
  return json{{"schema_version", kSchemaVersion},
              {"id", tree.id},
              {"title", tree.title},
              {"root", tree.root},
              {"nodes", std::move(nodes)},
              {"source", json{{"file", tree.source.file}, {"sheet", tree.source.sheet}}},
              {"created_at", tree.created_at}};
}

std::string serialize(const HOTree& tree) { return to_json(tree).dump(); }

HOTree from_json(const json& doc) {
  expect_keys(doc, {"schema_version", "id", "title", "root", "nodes", "source", "created_at"}, "tree");
  if (!doc["schema_version"].is_number_integer() || doc["schema_version"].get<long long>() != kSchemaVersion)
    schema("tree: unsupported schema_version");
  HOTree t;
  t.id = str(doc, "id", "tree");
  t.title = str(doc, "title", "tree");
  t.root = str(doc, "root", "tree");
  t.created_at = str(doc, "created_at", "tree");
  const auto& src = doc["source"];
  expect_keys(src, {"file", "sheet"}, "source");
  t.source.file = str(src, "file", "source");
  t.source.sheet = str(src, "sheet", "source");
  const auto& nodes = doc["nodes"];
  if (!nodes.is_object()) schema("tree: 'nodes' must be an object");
  for (const auto& [key, nj] : nodes.items()) {
    const std::string where = "node '" + key + "'";
    expect_keys(nj, {"id", "kind", "label", "field_type", "children", "origin"}, where);
    HONode n;
    n.id = str(nj, "id", where);
    if (n.id != key) schema(where + ": id does not match its key");
    auto kind = parse_node_kind(str(nj, "kind", where));
    if (!kind) schema(where + ": unknown kind");
    n.kind = *kind;
    n.label = str(nj, "label", where);
    if (!nj["field_type"].is_null()) {
      auto ft = parse_field_type(str(nj, "field_type", where));
      if (!ft) schema(where + ": unknown field_type");
      n.field_type = ft;
    }
    if (!nj["children"].is_array()) schema(where + ": 'children' must be an array");
    for (const auto& c : nj["children"]) {
      if (!c.is_string()) schema(where + ": child ids must be strings");
      n.children.push_back(c.get<std::string>());
    }
    const auto& oj = nj["origin"];
    if (!oj.is_null()) {
      expect_keys(oj, {"row", "col", "row_span", "col_span"}, where + " origin");
      Origin o{count(oj, "row", where), count(oj, "col", where), count(oj, "row_span", where),
               count(oj, "col_span", where)};
      if (o.row_span == 0 || o.col_span == 0) schema(where + ": spans must be positive");
      n.origin = o;
    }
    t.nodes.emplace(key, std::move(n));
  }
  validate(t);
  return t;
}

HOTree deserialize(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    fail(ErrorCode::SyntaxError, std::string("malformed tree JSON: ") + e.what());
  }
  return from_json(doc);
}

}  // namespace straptor::tree
