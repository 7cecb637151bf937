#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "tree/hotree.hpp"

namespace straptor::tree {

inline constexpr int kSchemaVersion = 1;

// Canonical form: sorted keys, no insignificant whitespace. Equal trees give
// identical bytes.
nlohmann::json to_json(const HOTree& tree);
std::string serialize(const HOTree& tree);

// Throws SyntaxError for malformed JSON, SchemaViolation for missing, extra
// or mistyped fields and unknown schema versions, StructureViolation when the
// decoded tree breaks the structural invariants.
HOTree from_json(const nlohmann::json& doc);
HOTree deserialize(std::string_view text);

}  // namespace straptor::tree
