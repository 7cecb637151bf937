#include "service/store.hpp"

#include <atomic>
#include <fstream>
#include <random>
#include <sstream>

#include "common/text.hpp"
#include "tree/serialize.hpp"

namespace straptor::service {

namespace fs = std::filesystem;

void write_atomic(const fs::path& path, const std::string& bytes) {
  static std::atomic<std::uint64_t> counter{0};
  const auto tmp = path.parent_path() / ("." + path.filename().string() + ".tmp" + std::to_string(++counter));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) fail(ErrorCode::Io, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorCode::Io, "cannot replace " + path.string());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool is_safe_id(std::string_view id) noexcept {
  if (id.empty() || id.size() > 128 || id.front() == '.') return false;
  for (char c : id)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) return false;
  return true;
}

FileTreeStore::FileTreeStore(fs::path dir) : dir_(std::move(dir)) {
  fs::create_directories(dir_);
  for (const auto& f : fs::directory_iterator(dir_)) {
    const auto name = f.path().filename().string();
    if (!name.ends_with(".json") || name.ends_with(".report.json") || name.ends_with(".version.json") ||
        name.front() == '.')
      continue;
    const auto id = name.substr(0, name.size() - 5);
    auto s = std::make_shared<Slot>();
    s->entry.tree_id = id;
    s->entry.bytes = read_file(f.path());
    s->tree = std::make_shared<const tree::HOTree>(tree::deserialize(s->entry.bytes));
    const auto report = dir_ / (id + ".report.json");
    if (fs::exists(report)) s->entry.report = t2t::ConstructionReport::from_json(json::parse(read_file(report)));
    const auto version = dir_ / (id + ".version.json");
    if (fs::exists(version)) s->entry.version = json::parse(read_file(version)).at("version").get<std::uint64_t>();
    slots_[id] = std::move(s);
  }
}

void FileTreeStore::persist(const TreeEntry& e) const {
  write_atomic(dir_ / (e.tree_id + ".json"), e.bytes);
  write_atomic(dir_ / (e.tree_id + ".report.json"), e.report.to_json().dump(2) + "\n");
  write_atomic(dir_ / (e.tree_id + ".version.json"), json{{"version", e.version}}.dump() + "\n");
}

std::shared_ptr<FileTreeStore::Slot> FileTreeStore::slot(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = slots_.find(id);
  return it == slots_.end() ? nullptr : it->second;
}

std::optional<agent::VersionedTree> FileTreeStore::find(const std::string& tree_id) const {
  auto s = slot(tree_id);
  if (!s) return std::nullopt;
  std::lock_guard lock(mu_);
  return agent::VersionedTree{*s->tree, s->entry.version};
}

std::optional<TreeEntry> FileTreeStore::entry(const std::string& tree_id) const {
  auto s = slot(tree_id);
  if (!s) return std::nullopt;
  std::lock_guard lock(mu_);
  return s->entry;
}

std::vector<TreeEntry> FileTreeStore::list() const {
  std::lock_guard lock(mu_);
  std::vector<TreeEntry> out;
  for (const auto& [_, s] : slots_) out.push_back(s->entry);
  return out;
}

std::string FileTreeStore::add(tree::HOTree t, const t2t::ConstructionReport& report) {
  tree::validate(t);
  std::lock_guard lock(mu_);
  const auto base = is_safe_id(t.id) ? t.id : "t" + text::hex64(text::fnv1a64(t.id));
  auto id = base;
  for (int n = 2; slots_.count(id); ++n) id = base + "-" + std::to_string(n);
  t.id = id;
  auto s = std::make_shared<Slot>();
  s->entry = TreeEntry{id, 1, tree::serialize(t), report};
  s->tree = std::make_shared<const tree::HOTree>(std::move(t));
  persist(s->entry);
  slots_[id] = std::move(s);
  return id;
}

TreeEntry FileTreeStore::patch(const std::string& tree_id, std::uint64_t base_version,
                               const std::vector<tree::TreeEditOp>& edits) {
  auto s = slot(tree_id);
  if (!s) fail(ErrorCode::TreeNotFound, "unknown tree " + tree_id);
  std::lock_guard write(s->write);
  TreeEntry current;
  std::shared_ptr<const tree::HOTree> tree;
  {
    std::lock_guard lock(mu_);
    current = s->entry;
    tree = s->tree;
  }
  if (base_version != current.version)
    fail(ErrorCode::VersionConflict, "tree " + tree_id + " is at version " + std::to_string(current.version) +
                                         ", edit was based on " + std::to_string(base_version));
  auto edited = std::make_shared<const tree::HOTree>(tree::apply_edits(*tree, edits));
  TreeEntry next = current;
  next.version = current.version + 1;
  next.bytes = tree::serialize(*edited);
  persist(next);
  std::lock_guard lock(mu_);
  s->entry = next;
  s->tree = std::move(edited);
  return next;
}

FileSessionStore::FileSessionStore(fs::path dir) : dir_(std::move(dir)) {
  fs::create_directories(dir_);
  for (const auto& f : fs::directory_iterator(dir_)) {
    const auto name = f.path().filename().string();
    if (!name.ends_with(".json") || name.front() == '.') continue;
    auto j = json::parse(read_file(f.path()), nullptr, false);
    if (j.is_discarded()) fail(ErrorCode::SyntaxError, "corrupt session file " + f.path().string());
    auto s = agent::Session::from_json(j);
    sessions_[s.id] = std::move(s);
  }
}

std::optional<agent::Session> FileSessionStore::load(const std::string& session_id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) return std::nullopt;
  return it->second;
}

void FileSessionStore::save(const agent::Session& s) {
  if (!is_safe_id(s.id)) fail(ErrorCode::InvalidArgument, "unsafe session id '" + s.id + "'");
  std::lock_guard lock(mu_);
  write_atomic(dir_ / (s.id + ".json"), s.to_json().dump(2) + "\n");
  sessions_[s.id] = s;
}

std::vector<std::string> FileSessionStore::list() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, _] : sessions_) out.push_back(id);
  return out;
}

}  // namespace straptor::service
