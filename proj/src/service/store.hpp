#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "agent/agent.hpp"
#include "table2tree/table2tree.hpp"
#include "tree/edits.hpp"
#include "tree/hotree.hpp"

namespace straptor::service {

using nlohmann::json;

// Writes to a sibling temporary file, then renames over `path`.
void write_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

// Ids double as file names.
bool is_safe_id(std::string_view id) noexcept;

struct TreeEntry {
  std::string tree_id;
  std::uint64_t version = 1;
  std::string bytes;  // canonical serialization
  t2t::ConstructionReport report;
};

// trees/<id>.json, trees/<id>.report.json, trees/<id>.version.json.
// Edits are serialized per tree; readers never block on other trees.
class FileTreeStore final : public agent::TreeCatalog {
 public:
  explicit FileTreeStore(std::filesystem::path dir);

  std::optional<agent::VersionedTree> find(const std::string& tree_id) const override;
  // Stores a new tree; a taken id gets a "-<n>" suffix.
  std::string add(tree::HOTree t, const t2t::ConstructionReport& report) override;

  std::optional<TreeEntry> entry(const std::string& tree_id) const;
  std::vector<TreeEntry> list() const;

  // Optimistic update. Throws TreeNotFound, VersionConflict or the edit error.
  TreeEntry patch(const std::string& tree_id, std::uint64_t base_version, const std::vector<tree::TreeEditOp>& edits);

 private:
  struct Slot {
    std::mutex write;
    TreeEntry entry;
    std::shared_ptr<const tree::HOTree> tree;
  };
  void persist(const TreeEntry& e) const;
  std::shared_ptr<Slot> slot(const std::string& id) const;

  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Slot>> slots_;
};

// sessions/<id>.json, written through on every save.
class FileSessionStore final : public agent::SessionStore {
 public:
  explicit FileSessionStore(std::filesystem::path dir);

  std::optional<agent::Session> load(const std::string& session_id) const override;
  void save(const agent::Session& s) override;
  std::vector<std::string> list() const override;

 private:
  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::map<std::string, agent::Session> sessions_;
};

}  // namespace straptor::service
