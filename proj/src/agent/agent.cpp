#include "agent/agent.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include "common/text.hpp"
#include "ingest/ingest.hpp"

namespace straptor::agent {

std::string_view to_string(Route r) noexcept {
  switch (r) {
    case Route::Retrieval: return "retrieval";
    case Route::Aggregation: return "aggregation";
    case Route::ImageExtraction: return "image_extraction";
  }
  return "retrieval";
}

std::optional<Route> parse_route(std::string_view s) noexcept {
  for (auto r : {Route::Retrieval, Route::Aggregation, Route::ImageExtraction})
    if (to_string(r) == s) return r;
  return std::nullopt;
}

namespace {

[[noreturn]] void bad_schema(const std::string& what, const std::exception& e) {
  fail(ErrorCode::SchemaViolation, "bad " + what + ": " + e.what());
}

}  // namespace

json Turn::to_json() const {
  return {{"index", index},
          {"raw_question", raw_question},
          {"resolved_question", resolved_question},
          {"tree_id", tree_id},
          {"tree_version", tree_version},
          {"routing", {{"route", to_string(routing.route)}, {"rationale", routing.rationale}}},
          {"answer", answer},
          {"reply", reply},
          {"warnings", warnings},
          {"created_at", created_at}};
}

Turn Turn::from_json(const json& j) {
  try {
    Turn t;
    t.index = j.at("index").get<std::size_t>();
    t.raw_question = j.at("raw_question").get<std::string>();
    t.resolved_question = j.at("resolved_question").get<std::string>();
    t.tree_id = j.at("tree_id").get<std::string>();
    t.tree_version = j.at("tree_version").get<std::uint64_t>();
    auto route = parse_route(j.at("routing").at("route").get<std::string>());
    if (!route) fail(ErrorCode::SchemaViolation, "unknown route");
    t.routing = {*route, j.at("routing").at("rationale").get<std::string>()};
    t.answer = j.at("answer");
    t.reply = j.at("reply").get<std::string>();
    t.warnings = j.at("warnings").get<std::vector<std::string>>();
    t.created_at = j.at("created_at").get<std::string>();
    return t;
  } catch (const json::exception& e) {
    bad_schema("turn", e);
  }
}

json Session::to_json() const {
  json turns_json = json::array();
  for (const auto& t : turns) turns_json.push_back(t.to_json());
  return {{"id", id},
          {"turns", turns_json},
          {"tree_ids", tree_ids},
          {"active_tree", active_tree ? json(*active_tree) : json(nullptr)},
          {"created_at", created_at}};
}

Session Session::from_json(const json& j) {
  try {
    Session s;
    s.id = j.at("id").get<std::string>();
    for (const auto& t : j.at("turns")) s.turns.push_back(Turn::from_json(t));
    s.tree_ids = j.at("tree_ids").get<std::vector<std::string>>();
    if (!j.at("active_tree").is_null()) s.active_tree = j.at("active_tree").get<std::string>();
    s.created_at = j.at("created_at").get<std::string>();
    if (s.active_tree && std::find(s.tree_ids.begin(), s.tree_ids.end(), *s.active_tree) == s.tree_ids.end())
      fail(ErrorCode::SchemaViolation, "active tree is not attached to the session");
    return s;
  } catch (const json::exception& e) {
    bad_schema("session", e);
  }
}

std::optional<VersionedTree> MemoryCatalog::find(const std::string& tree_id) const {
  std::lock_guard lock(mu_);
  auto it = trees_.find(tree_id);
  if (it == trees_.end()) return std::nullopt;
  return it->second;
}

std::string MemoryCatalog::add(tree::HOTree t, const t2t::ConstructionReport&) {
  auto id = t.id;
  put(std::move(t));
  return id;
}

void MemoryCatalog::put(tree::HOTree t, std::uint64_t version) {
  std::lock_guard lock(mu_);
  auto id = t.id;
  trees_[id] = VersionedTree{std::move(t), version};
}

std::optional<Session> MemorySessionStore::load(const std::string& session_id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) return std::nullopt;
  return it->second;
}

void MemorySessionStore::save(const Session& s) {
  std::lock_guard lock(mu_);
  sessions_[s.id] = s;
}

std::vector<std::string> MemorySessionStore::list() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, _] : sessions_) out.push_back(id);
  return out;
}

// ---- resolution ---------------------------------------------------------------

bool has_referring_expression(const std::string& question) {
  static const std::regex kRef(
      R"(\b(it|its|it's|they|them|their|theirs|he|she|him|his|her|hers|this|that|these|those|same|former|latter|aforementioned)\b|\bthe (table|file|sheet|one) from\b)",
      std::regex::icase);
  return std::regex_search(question, kRef);
}

std::string resolve_references(const std::string& question, const Session& session, const gateway::Gateway* gw,
                               std::vector<std::string>& warnings, std::size_t k) {
  if (!has_referring_expression(question)) return question;
  if (session.turns.empty()) {
    warnings.push_back("no earlier turns to resolve references against");
    return question;
  }
  if (!gw || !gw->has(gateway::ProviderKind::Llm)) {
    warnings.push_back("no LLM configured for reference resolution");
    return question;
  }
  std::ostringstream context;
  const auto first = session.turns.size() > k ? session.turns.size() - k : 0;
  for (std::size_t i = first; i < session.turns.size(); ++i) {
    const auto& t = session.turns[i];
    context << "Q: " << t.resolved_question << "\nA: " << t.answer.value("text", std::string()) << "\n";
  }
  gateway::ChatRequest req;
  req.template_id = "resolve";
  req.salient_args = {question};
  req.prompt = "Rewrite the last question so it is self-contained, replacing pronouns and references such as "
               "\"this product\" with what they refer to in the conversation. Reply with the question only.\n"
               "Conversation:\n" + context.str() + "Question: " + question;
  try {
    auto out = std::string(text::trim(text::collapse_whitespace(gw->complete(gateway::ProviderKind::Llm, req))));
    if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
    if (out.empty()) {
      warnings.push_back("reference resolution returned nothing; using the question as asked");
      return question;
    }
    return out;
  } catch (const Error& e) {
    warnings.push_back("reference resolution failed (" + std::string(to_string(e.code())) + "): " + e.what());
    return question;
  }
}

// ---- localization ---------------------------------------------------------------

std::string tree_signature(const tree::HOTree& t) {
  const tree::TreeView view(t);
  std::vector<std::string> labels;
  std::set<std::string> seen;
  for (const auto& id : view.preorder()) {
    const auto& n = view.node(id);
    if (n.kind != tree::NodeKind::Meta) continue;
    auto l = text::collapse_whitespace(n.label);
    if (!l.empty() && seen.insert(l).second) labels.push_back(l);
    if (labels.size() >= 64) break;
  }
  return t.title + ": " + text::join(labels, ", ");
}

namespace {

std::set<std::string> words(const std::string& s) {
  std::set<std::string> out;
  std::string cur;
  for (char c : text::to_lower(s) + " ") {
    if (std::isalnum(static_cast<unsigned char>(c)) || (static_cast<unsigned char>(c) & 0x80)) {
      cur.push_back(c);
    } else if (!cur.empty()) {
      out.insert(cur);
      cur.clear();
    }
  }
  return out;
}

double lexical_score(const std::string& q, const std::string& sig) {
  const auto a = words(q);
  const auto b = words(sig);
  if (a.empty() || b.empty()) return 0;
  std::size_t common = 0;
  for (const auto& w : a) common += b.count(w);
  return static_cast<double>(common) / static_cast<double>(a.size());
}

}  // namespace

Localization localize_table(const std::string& question, const Session& session, const TreeCatalog& trees,
                            const gateway::Gateway* gw, double margin) {
  std::vector<std::string> ids;
  std::vector<std::string> sigs;
  for (const auto& id : session.tree_ids)
    if (auto t = trees.find(id)) {
      ids.push_back(id);
      sigs.push_back(tree_signature(t->tree));
    }
  if (ids.empty()) fail(ErrorCode::NoTrees, "session " + session.id + " has no trees to answer from");
  Localization loc;
  std::vector<double> scores(ids.size(), 0.0);
  loc.method = "lexical";
  if (gw && gw->has(gateway::ProviderKind::Embedding) && ids.size() > 1) {
    try {
      std::vector<std::string> texts{question};
      texts.insert(texts.end(), sigs.begin(), sigs.end());
      const auto vecs = gw->embed(texts);
      for (std::size_t i = 0; i < ids.size(); ++i) scores[i] = gateway::cosine_similarity(vecs[0], vecs[i + 1]);
      loc.method = "embedding";
    } catch (const Error&) {
      scores.assign(ids.size(), 0.0);
    }
  }
  if (loc.method == "lexical")
    for (std::size_t i = 0; i < ids.size(); ++i) scores[i] = lexical_score(question, sigs[i]);
  std::size_t best = 0;
  for (std::size_t i = 1; i < ids.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  double runner_up = -INFINITY;
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (i != best) runner_up = std::max(runner_up, scores[i]);
  for (std::size_t i = 0; i < ids.size(); ++i) loc.scores[ids[i]] = scores[i];
  loc.tree_id = ids[best];
  const bool active_ok =
      session.active_tree && std::find(ids.begin(), ids.end(), *session.active_tree) != ids.end();
  if (active_ok && ids.size() > 1 && scores[best] - runner_up < margin) {
    loc.tree_id = *session.active_tree;
    loc.kept_active = true;
  }
  return loc;
}

bool has_aggregate_intent(const std::string& question) {
  static const std::regex kAgg(
      R"(\b(sum|total|average|avg|mean|count|how many|number of|max|maximum|min|minimum|highest|lowest|largest|smallest|top|bottom|compare|more than|less than|greater|fewer|rank)\b)",
      std::regex::icase);
  return std::regex_search(question, kAgg);
}

t2t::BuildResult extract_table_image(const Attachment& a, const gateway::Gateway* gw, const t2t::BuildOptions& options) {
  if (!gw || !gw->has(gateway::ProviderKind::Vlm)) fail(ErrorCode::InvalidConfig, "image extraction needs a VLM provider");
  const auto name = a.name.empty() ? a.resource_id : a.name;
  gateway::ChatRequest req;
  req.template_id = "extract_table";
  req.salient_args = {name};
  req.image = a.resource_id;
  req.prompt = "Transcribe the table in this image as a Markdown table, keeping every header level. "
               "Stitch fragments into one table. Reply with the table only.";
  const auto reply = gw->complete(gateway::ProviderKind::Vlm, req);
  ingest::CellGrid grid;
  if (reply.find("<table") != std::string::npos) {
    grid = ingest::parse_html(reply);
  } else if (reply.find('|') != std::string::npos) {
    grid = ingest::parse_markdown(reply);
  } else {
    grid = ingest::parse_csv(reply);
  }
  grid.set_source({name, ""});
  if (!grid.title()) grid.set_title(text::file_stem(name));
  return t2t::build_hotree(grid, gw, options);
}

// ---- agent ------------------------------------------------------------------------

Agent::Agent(std::shared_ptr<const gateway::Gateway> gw, TreeCatalog& trees, SessionStore& sessions, EventLog* log,
             AgentOptions options)
    : gw_(std::move(gw)), trees_(trees), sessions_(sessions), log_(log), options_(std::move(options)) {}

void Agent::set_gateway(std::shared_ptr<const gateway::Gateway> gw) {
  std::lock_guard lock(mu_);
  gw_ = std::move(gw);
}

std::shared_ptr<const gateway::Gateway> Agent::gateway() const {
  std::lock_guard lock(mu_);
  return gw_;
}

std::shared_ptr<std::mutex> Agent::session_lock(const std::string& id) {
  std::lock_guard lock(mu_);
  auto& m = locks_[id];
  if (!m) m = std::make_shared<std::mutex>();
  return m;
}

void Agent::log(std::string_view stage, std::string_view event, json detail) const {
  if (log_) log_->emit(stage, event, std::move(detail));
}

Session Agent::create_session(std::vector<std::string> tree_ids, std::string id) {
  for (const auto& t : tree_ids)
    if (!trees_.find(t)) fail(ErrorCode::TreeNotFound, "unknown tree " + t);
  if (id.empty()) {
    std::random_device rd;
    std::uint64_t counter;
    {
      std::lock_guard lock(mu_);
      counter = ++session_counter_;
    }
    id = "s" + text::hex64((static_cast<std::uint64_t>(rd()) << 32) ^ rd() ^ counter).substr(0, 12);
  }
  if (sessions_.load(id)) fail(ErrorCode::InvalidArgument, "session " + id + " already exists");
  Session s;
  s.id = id;
  s.created_at = tree::utc_timestamp_now();
  for (auto& t : tree_ids)
    if (std::find(s.tree_ids.begin(), s.tree_ids.end(), t) == s.tree_ids.end()) s.tree_ids.push_back(std::move(t));
  if (!s.tree_ids.empty()) s.active_tree = s.tree_ids.front();
  sessions_.save(s);
  log("agent", "session_created", {{"session_id", s.id}, {"tree_ids", s.tree_ids}});
  return s;
}

Session Agent::attach_trees(const std::string& session_id, const std::vector<std::string>& tree_ids) {
  auto lock = session_lock(session_id);
  std::lock_guard guard(*lock);
  auto s = sessions_.load(session_id);
  if (!s) fail(ErrorCode::SessionNotFound, "unknown session " + session_id);
  for (const auto& t : tree_ids) {
    if (!trees_.find(t)) fail(ErrorCode::TreeNotFound, "unknown tree " + t);
    if (std::find(s->tree_ids.begin(), s->tree_ids.end(), t) == s->tree_ids.end()) s->tree_ids.push_back(t);
  }
  if (!s->active_tree && !s->tree_ids.empty()) s->active_tree = s->tree_ids.front();
  sessions_.save(*s);
  return *s;
}

std::string Agent::extract(const Attachment& a, const gateway::Gateway* gw) {
  auto built = extract_table_image(a, gw, options_.build);
  return trees_.add(qa::tag_field_types(built.tree, options_.answer.tagging), built.report);
}

Turn Agent::handle_turn(const std::string& session_id, const std::string& question,
                        const std::vector<Attachment>& attachments) {
  return handle_turn(session_id, question, attachments, options_.answer);
}

namespace {

std::string frame_reply(const qa::Answer& a, const std::string& title, Route route) {
  if (a.error) return "I could not answer this from \"" + title + "\". " + a.text;
  const auto c = text::display_number(std::round(a.confidence * 100) / 100);
  const std::string lead = route == Route::Aggregation ? "Computed from \"" : "Found in \"";
  return lead + title + "\": " + a.text + " (confidence " + c + ")";
}

qa::Answer failed_answer(const Error& e) {
  qa::Answer a;
  a.error = e.code();
  a.text = "Unable to answer: " + std::string(e.what());
  return a;
}

}  // namespace

Turn Agent::handle_turn(const std::string& session_id, const std::string& question,
                        const std::vector<Attachment>& attachments, const qa::AnswerOptions& answer_options) {
  auto lock = session_lock(session_id);
  std::lock_guard guard(*lock);
  auto loaded = sessions_.load(session_id);
  if (!loaded) fail(ErrorCode::SessionNotFound, "unknown session " + session_id);
  Session s = std::move(*loaded);
  const auto gw_ptr = gateway();
  const auto* gw = gw_ptr.get();

  Turn turn;
  turn.index = s.turns.size();
  turn.raw_question = question;
  turn.created_at = tree::utc_timestamp_now();
  log("agent", "turn_started", {{"session_id", s.id}, {"index", turn.index}, {"question", question}});

  std::optional<qa::Answer> answer;
  std::string title;
  const auto q = std::string(text::trim(question));

  if (!attachments.empty()) {
    turn.routing = {Route::ImageExtraction, std::to_string(attachments.size()) + " image attachment(s)"};
    std::vector<std::string> added;
    for (const auto& a : attachments) {
      try {
        added.push_back(extract(a, gw));
        log("agent", "image_extracted", {{"session_id", s.id}, {"tree_id", added.back()}, {"resource", a.resource_id}});
      } catch (const Error& e) {
        turn.warnings.push_back("extraction of " + (a.name.empty() ? a.resource_id : a.name) +
                                " failed: " + e.what());
        log("agent", "image_extraction_failed", {{"session_id", s.id}, {"resource", a.resource_id}, {"error", e.what()}});
      }
    }
    for (const auto& id : added)
      if (std::find(s.tree_ids.begin(), s.tree_ids.end(), id) == s.tree_ids.end()) s.tree_ids.push_back(id);
    if (!added.empty()) {
      s.active_tree = added.back();
      turn.tree_id = added.back();
      if (auto t = trees_.find(turn.tree_id)) {
        turn.tree_version = t->version;
        title = t->tree.title;
      }
    }
    turn.resolved_question = q.empty() ? "Extract the table from the attached image" : q;
    if (added.empty()) {
      answer = failed_answer(Error(ErrorCode::ModelError, "no table could be extracted from the attachments"));
    } else if (q.empty()) {
      qa::Answer a;
      a.text = "HO-Tree generated successfully";
      a.confidence = 1.0;
      answer = a;
    }
  } else {
    turn.resolved_question = resolve_references(q, s, gw, turn.warnings, options_.history_k);
    if (turn.resolved_question.empty()) turn.resolved_question = q.empty() ? "(empty question)" : q;
    log("agent", "question_resolved", {{"session_id", s.id}, {"resolved", turn.resolved_question}});
    const bool agg = has_aggregate_intent(turn.resolved_question);
    turn.routing = {agg ? Route::Aggregation : Route::Retrieval,
                    agg ? "aggregate intent keywords in the question" : "no aggregate intent keywords"};
  }

  if (!answer) {
    try {
      std::string tree_id = turn.tree_id;
      if (tree_id.empty()) {
        auto loc = localize_table(turn.resolved_question, s, trees_, gw, options_.margin);
        tree_id = loc.tree_id;
        log("agent", "table_localized",
            {{"session_id", s.id}, {"tree_id", tree_id}, {"method", loc.method}, {"scores", loc.scores},
             {"kept_active", loc.kept_active}});
      }
      auto t = trees_.find(tree_id);
      if (!t) fail(ErrorCode::TreeNotFound, "tree " + tree_id + " is no longer available");
      s.active_tree = tree_id;
      turn.tree_id = tree_id;
      turn.tree_version = t->version;
      title = t->tree.title;
      answer = qa::answer(turn.resolved_question, t->tree, gw, answer_options);
      if (answer->plan && turn.routing.route == Route::Retrieval) {
        const auto& last = answer->plan->steps.back().op;
        if (last == "aggregate" || last == "top_k" || last == "compare")
          turn.routing = {Route::Aggregation, "plan ends in " + last};
      }
    } catch (const Error& e) {
      answer = failed_answer(e);
    }
  }

  turn.answer = answer->to_json();
  turn.reply = frame_reply(*answer, title, turn.routing.route);
  log("agent", "turn_answered",
      {{"session_id", s.id}, {"index", turn.index}, {"route", to_string(turn.routing.route)},
       {"tree_id", turn.tree_id}, {"confidence", answer->confidence}, {"elapsed_ms", answer->elapsed_ms}});
  s.turns.push_back(turn);
  sessions_.save(s);
  return turn;
}

}  // namespace straptor::agent
