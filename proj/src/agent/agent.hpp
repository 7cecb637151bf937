#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "common/event_log.hpp"
#include "gateway/gateway.hpp"
#include "qa/qa.hpp"
#include "table2tree/table2tree.hpp"
#include "tree/hotree.hpp"

namespace straptor::agent {

using nlohmann::json;

enum class Route { Retrieval, Aggregation, ImageExtraction };
std::string_view to_string(Route r) noexcept;
std::optional<Route> parse_route(std::string_view s) noexcept;

struct RoutingDecision {
  Route route = Route::Retrieval;
  std::string rationale;
};

struct Turn {
  std::size_t index = 0;
  std::string raw_question;
  std::string resolved_question;
  std::string tree_id;
  std::uint64_t tree_version = 0;
  RoutingDecision routing;
  json answer = json::object();  // qa::Answer::to_json()
  std::string reply;
  std::vector<std::string> warnings;
  std::string created_at;

  json to_json() const;
  static Turn from_json(const json& j);  // throws SchemaViolation
};

struct Session {
  std::string id;
  std::vector<Turn> turns;
  std::vector<std::string> tree_ids;
  std::optional<std::string> active_tree;
  std::string created_at;

  json to_json() const;
  static Session from_json(const json& j);  // throws SchemaViolation
};

struct VersionedTree {
  tree::HOTree tree;
  std::uint64_t version = 1;
};

// Where the agent reads trees from and adds extracted ones to.
class TreeCatalog {
 public:
  virtual ~TreeCatalog() = default;
  virtual std::optional<VersionedTree> find(const std::string& tree_id) const = 0;
  // Returns the stored id.
  virtual std::string add(tree::HOTree t, const t2t::ConstructionReport& report) = 0;
};

class SessionStore {
 public:
  virtual ~SessionStore() = default;
  virtual std::optional<Session> load(const std::string& session_id) const = 0;
  virtual void save(const Session& s) = 0;
  virtual std::vector<std::string> list() const = 0;
};

class MemoryCatalog final : public TreeCatalog {
 public:
  std::optional<VersionedTree> find(const std::string& tree_id) const override;
  std::string add(tree::HOTree t, const t2t::ConstructionReport& report) override;
  void put(tree::HOTree t, std::uint64_t version = 1);

 private:
  mutable std::mutex mu_;
  std::map<std::string, VersionedTree> trees_;
};

class MemorySessionStore final : public SessionStore {
 public:
  std::optional<Session> load(const std::string& session_id) const override;
  void save(const Session& s) override;
  std::vector<std::string> list() const override;

 private:
  mutable std::mutex mu_;
  std::map<std::string, Session> sessions_;
};

// True when the question leans on earlier context (pronouns, "this X",
// "the table from yesterday").
bool has_referring_expression(const std::string& question);

// Rewrites the question from the last `k` turns with the LLM (template
// "resolve"). Falls back to the raw question, appending to `warnings`, when
// there is nothing to resolve against or the model fails.
std::string resolve_references(const std::string& question, const Session& session, const gateway::Gateway* gw,
                               std::vector<std::string>& warnings, std::size_t k = 5);

// Title followed by the Meta labels in preorder.
std::string tree_signature(const tree::HOTree& t);

struct Localization {
  std::string tree_id;
  std::string method;  // "embedding" or "lexical"
  std::map<std::string, double> scores;
  bool kept_active = false;
};

// Nearest tree signature by cosine similarity, lexical overlap when
// embeddings are unavailable. A margin below `margin` keeps the active tree.
// Throws NoTrees.
Localization localize_table(const std::string& question, const Session& session, const TreeCatalog& trees,
                            const gateway::Gateway* gw, double margin = 0.05);

bool has_aggregate_intent(const std::string& question);

struct Attachment {
  std::string resource_id;  // resolved by the gateway's resource resolver
  std::string name;
};

// VLM transcription (template "extract_table") of an image into a grid,
// then table2tree. Throws on model or parse failure.
t2t::BuildResult extract_table_image(const Attachment& a, const gateway::Gateway* gw, const t2t::BuildOptions& options);

struct AgentOptions {
  qa::AnswerOptions answer;
  t2t::BuildOptions build;
  std::size_t history_k = 5;
  double margin = 0.05;
};

class Agent {
 public:
  Agent(std::shared_ptr<const gateway::Gateway> gw, TreeCatalog& trees, SessionStore& sessions, EventLog* log = nullptr,
        AgentOptions options = {});

  void set_gateway(std::shared_ptr<const gateway::Gateway> gw);
  std::shared_ptr<const gateway::Gateway> gateway() const;

  Session create_session(std::vector<std::string> tree_ids = {}, std::string id = {});
  // Throws SessionNotFound; TreeNotFound for unknown tree ids.
  Session attach_trees(const std::string& session_id, const std::vector<std::string>& tree_ids);

  // Always yields a Turn; failures land in its answer with confidence 0.
  // Throws SessionNotFound only.
  Turn handle_turn(const std::string& session_id, const std::string& question,
                   const std::vector<Attachment>& attachments = {});

  // Same as handle_turn with a per-call answer configuration.
  Turn handle_turn(const std::string& session_id, const std::string& question,
                   const std::vector<Attachment>& attachments, const qa::AnswerOptions& answer_options);

 private:
  std::shared_ptr<std::mutex> session_lock(const std::string& id);
  void log(std::string_view stage, std::string_view event, json detail) const;
  std::string extract(const Attachment& a, const gateway::Gateway* gw);

  mutable std::mutex mu_;
  std::shared_ptr<const gateway::Gateway> gw_;
  TreeCatalog& trees_;
  SessionStore& sessions_;
  EventLog* log_;
  AgentOptions options_;
  std::map<std::string, std::shared_ptr<std::mutex>> locks_;
  std::uint64_t session_counter_ = 0;
};

}  // namespace straptor::agent
