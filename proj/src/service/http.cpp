#include <openssl/evp.h>

#include <httplib.h>

#include "common/text.hpp"
#include "ingest/ingest.hpp"
#include "service/service.hpp"
#include "tree/edits.hpp"
#include "tree/serialize.hpp"

namespace straptor::service {

namespace {

int http_status(ErrorCode c) {
  switch (c) {
    case ErrorCode::SessionNotFound:
    case ErrorCode::TreeNotFound:
    case ErrorCode::JobNotFound: return 404;
    case ErrorCode::VersionConflict: return 409;
    case ErrorCode::NodeNotFound:
    case ErrorCode::CycleCreated:
    case ErrorCode::RootDeletion:
    case ErrorCode::InvalidEdit:
    case ErrorCode::StructureViolation: return 422;
    case ErrorCode::UnsupportedFormat: return 415;
    case ErrorCode::InvalidArgument:
    case ErrorCode::SyntaxError:
    case ErrorCode::SchemaViolation:
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidEncoding: return 400;
    default: return 500;
  }
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string code, std::string message, json detail = nullptr) {
  send_json(res, status, {{"code", std::move(code)}, {"message", std::move(message)}, {"detail", std::move(detail)}});
}

template <class F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_error(res, http_status(e.code()), std::string(to_string(e.code())), e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, "SyntaxError", std::string("malformed JSON body: ") + e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "Internal", e.what());
    }
  };
}

json body_json(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  auto j = json::parse(req.body, nullptr, false);
  if (j.is_discarded()) fail(ErrorCode::SyntaxError, "request body is not valid JSON");
  if (!j.is_object()) fail(ErrorCode::InvalidArgument, "request body must be a JSON object");
  return j;
}

std::string base64_decode(const std::string& in) {
  std::string clean;
  for (char c : in)
    if (!std::isspace(static_cast<unsigned char>(c))) clean.push_back(c);
  if (clean.size() % 4 != 0) fail(ErrorCode::InvalidArgument, "attachment content is not valid base64");
  std::string out(clean.size() / 4 * 3, '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(clean.data()), static_cast<int>(clean.size()));
  if (n < 0) fail(ErrorCode::InvalidArgument, "attachment content is not valid base64");
  std::size_t pad = 0;
  if (!clean.empty() && clean.back() == '=') ++pad;
  if (clean.size() > 1 && clean[clean.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

BuildParams build_params(const std::string& mode, const std::string& tau) {
  BuildParams p;
  if (!mode.empty()) {
    auto m = mode == "model" ? std::optional(t2t::BuildMode::ModelAssisted) : t2t::parse_build_mode(mode);
    if (!m) fail(ErrorCode::InvalidArgument, "mode must be heuristic or model_assisted");
    p.mode = *m;
  }
  if (!tau.empty()) {
    try {
      std::size_t used = 0;
      p.tau = std::stod(tau, &used);
      if (used != tau.size()) throw std::invalid_argument(tau);
    } catch (const std::exception&) {
      fail(ErrorCode::InvalidArgument, "tau must be a number");
    }
    if (!(p.tau >= 0 && p.tau <= 1)) fail(ErrorCode::InvalidArgument, "tau must lie in [0, 1]");
  }
  return p;
}

std::string json_string(const json& j, const char* key, const std::string& fallback = {}) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  if (j[key].is_string()) return j[key].get<std::string>();
  if (j[key].is_number()) return j[key].dump();
  fail(ErrorCode::InvalidArgument, std::string("'") + key + "' must be a string");
}

json tree_summary(const TreeEntry& e, const agent::TreeCatalog& trees) {
  const auto t = trees.find(e.tree_id);
  return {{"tree_id", e.tree_id},
          {"version", e.version},
          {"title", t ? t->tree.title : ""},
          {"source", t ? json{{"file", t->tree.source.file}, {"sheet", t->tree.source.sheet}} : json(nullptr)},
          {"report", e.report.to_json()}};
}

json session_summary(const agent::Session& s) {
  return {{"session_id", s.id},
          {"created_at", s.created_at},
          {"tree_ids", s.tree_ids},
          {"active_tree", s.active_tree ? json(*s.active_tree) : json(nullptr)},
          {"turn_count", s.turns.size()},
          {"last_question", s.turns.empty() ? json(nullptr) : json(s.turns.back().raw_question)}};
}

json turn_response(const std::string& session_id, const agent::Turn& t) {
  const auto& a = t.answer;
  return {{"session_id", session_id},
          {"turn_index", t.index},
          {"question", t.raw_question},
          {"resolved_question", t.resolved_question},
          {"tree_id", t.tree_id},
          {"tree_version", t.tree_version},
          {"route", agent::to_string(t.routing.route)},
          {"reply", t.reply},
          {"text", a.value("text", "")},
          {"confidence", a.value("confidence", 0.0)},
          {"elapsed_ms", a.value("elapsed_ms", 0.0)},
          {"sub_questions", a.value("sub_questions", json::array())},
          {"retrieval_path", a.value("retrieval_path", json::array())},
          {"warnings", t.warnings},
          {"turn", t.to_json()}};
}

}  // namespace

void Service::install_routes() {
  auto& svr = *http_;
  svr.set_payload_max_length(options_.max_body_bytes);
  svr.set_default_headers({{"Access-Control-Allow-Origin", options_.cors_origin},
                           {"Access-Control-Allow-Methods", "GET, POST, PUT, PATCH, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"},
                           {"Access-Control-Expose-Headers", "ETag, X-Tree-Version"}});
  svr.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 413) send_error(res, 413, "PayloadTooLarge", "request body exceeds the size limit");
    else if (res.status == 404) send_error(res, 404, "NotFound", "no such endpoint");
    else send_error(res, res.status, "HttpError", httplib::status_message(res.status));
  });
  svr.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
    send_error(res, 500, "Internal", "unhandled server error");
  });
  svr.Options(R"(/api/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  svr.Post("/api/v1/jobs", guarded([this](const httplib::Request& req, httplib::Response& res) {
    std::vector<UploadedFile> files;
    BuildParams params;
    if (req.is_multipart_form_data()) {
      std::string mode, tau;
      for (const auto& [field, part] : req.files) {
        if (!part.filename.empty()) files.push_back({part.filename, part.content});
        else if (field == "mode") mode = part.content;
        else if (field == "tau") tau = part.content;
      }
      params = build_params(mode, tau);
    } else {
      const auto j = body_json(req);
      params = build_params(json_string(j, "mode"), json_string(j, "tau"));
      for (const auto& f : j.value("files", json::array())) {
        UploadedFile u{json_string(f, "name"), {}};
        if (f.contains("content_base64")) u.bytes = base64_decode(json_string(f, "content_base64"));
        else u.bytes = json_string(f, "content");
        files.push_back(std::move(u));
      }
    }
    const auto id = submit_tables(std::move(files), params);
    send_json(res, 202, {{"job_id", id}});
  }));

  svr.Get(R"(/api/v1/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, job(req.matches[1]).to_json());
  }));

  svr.Get("/api/v1/trees", guarded([this](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    for (const auto& e : trees_.list()) out.push_back(tree_summary(e, trees_));
    send_json(res, 200, {{"trees", out}});
  }));

  svr.Post("/api/v1/trees", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto j = body_json(req);
    tree::HOTree t;
    if (j.contains("tree")) {
      t = tree::from_json(j["tree"]);
    } else {
      const auto title = json_string(j, "title", "untitled");
      t.title = title;
      t.root = "n0";
      t.nodes["n0"] = tree::HONode{"n0", tree::NodeKind::Root, title, std::nullopt, {}, std::nullopt};
      t.created_at = tree::utc_timestamp_now();
      t.id = "t" + text::hex64(text::fnv1a64(title + t.created_at));
    }
    t2t::ConstructionReport report;
    report.meta_count = t.count(tree::NodeKind::Meta);
    report.body_count = t.count(tree::NodeKind::Body);
    const auto id = trees_.add(qa::tag_field_types(t), report);
    log_.emit("trees", "created", {{"tree_id", id}});
    send_json(res, 201, tree_summary(*trees_.entry(id), trees_));
  }));

  svr.Get(R"(/api/v1/trees/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto e = trees_.entry(req.matches[1]);
    if (!e) fail(ErrorCode::TreeNotFound, "unknown tree " + std::string(req.matches[1]));
    res.set_header("ETag", "\"" + std::to_string(e->version) + "\"");
    res.set_header("X-Tree-Version", std::to_string(e->version));
    res.status = 200;
    res.set_content(e->bytes, "application/json");
  }));

  svr.Get(R"(/api/v1/trees/([^/]+)/report)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto e = trees_.entry(req.matches[1]);
    if (!e) fail(ErrorCode::TreeNotFound, "unknown tree " + std::string(req.matches[1]));
    send_json(res, 200, tree_summary(*e, trees_));
  }));

  svr.Patch(R"(/api/v1/trees/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto j = body_json(req);
    if (!j.contains("base_version") || !j["base_version"].is_number_unsigned())
      fail(ErrorCode::InvalidArgument, "base_version must be a non-negative integer");
    if (!j.contains("edits")) fail(ErrorCode::InvalidArgument, "edits are required");
    const std::string id = req.matches[1];
    try {
      const auto e = trees_.patch(id, j["base_version"].get<std::uint64_t>(), tree::edits_from_json(j["edits"]));
      log_.emit("trees", "patched", {{"tree_id", id}, {"version", e.version}, {"edits", j["edits"].size()}});
      res.set_header("X-Tree-Version", std::to_string(e.version));
      send_json(res, 200, {{"tree_id", id}, {"version", e.version}});
    } catch (const Error& e) {
      log_.emit("trees", "patch_rejected", {{"tree_id", id}, {"code", to_string(e.code())}, {"message", e.what()}});
      if (e.code() == ErrorCode::VersionConflict) {
        const auto cur = trees_.entry(id);
        send_error(res, 409, "VersionConflict", e.what(), {{"current_version", cur ? cur->version : 0}});
        return;
      }
      throw;
    }
  }));

  svr.Post("/api/v1/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto j = body_json(req);
    std::vector<std::string> ids;
    if (j.contains("tree_ids")) {
      if (!j["tree_ids"].is_array()) fail(ErrorCode::InvalidArgument, "tree_ids must be a list");
      for (const auto& t : j["tree_ids"]) ids.push_back(t.get<std::string>());
    } else {
      for (const auto& e : trees_.list()) ids.push_back(e.tree_id);
    }
    const auto s = agent_->create_session(ids);
    send_json(res, 201, {{"session_id", s.id}, {"session", session_summary(s)}});
  }));

  svr.Get("/api/v1/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    for (const auto& id : sessions_.list())
      if (auto s = sessions_.load(id)) out.push_back(session_summary(*s));
    send_json(res, 200, {{"sessions", out}});
  }));

  svr.Get(R"(/api/v1/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto s = sessions_.load(req.matches[1]);
    if (!s) fail(ErrorCode::SessionNotFound, "unknown session " + std::string(req.matches[1]));
    send_json(res, 200, s->to_json());
  }));

  svr.Post(R"(/api/v1/sessions/([^/]+)/trees)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto j = body_json(req);
    if (!j.contains("tree_ids") || !j["tree_ids"].is_array()) fail(ErrorCode::InvalidArgument, "tree_ids must be a list");
    const auto s = agent_->attach_trees(req.matches[1], j["tree_ids"].get<std::vector<std::string>>());
    send_json(res, 200, session_summary(s));
  }));

  svr.Post(R"(/api/v1/sessions/([^/]+)/questions)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string sid = req.matches[1];
    if (!sessions_.load(sid)) fail(ErrorCode::SessionNotFound, "unknown session " + sid);
    const auto j = body_json(req);
    const auto question = json_string(j, "question");
    std::vector<agent::Attachment> attachments;
    for (const auto& a : j.value("attachments", json::array())) {
      if (a.is_string()) {
        const auto rel = a.get<std::string>();
        if (!rel.starts_with("uploads/") || rel.find("..") != std::string::npos ||
            !std::filesystem::exists(options_.data_dir / rel))
          fail(ErrorCode::InvalidArgument, "unknown attachment " + rel);
        attachments.push_back({rel, std::filesystem::path(rel).filename().string()});
      } else {
        const auto name = json_string(a, "name", "image.png");
        if (!ingest::is_image(name)) fail(ErrorCode::UnsupportedFormat, "attachments must be images: " + name);
        const auto rel = save_upload(sid, name, base64_decode(json_string(a, "content_base64")));
        attachments.push_back({rel, name});
      }
    }
    if (text::trim(question).empty() && attachments.empty()) fail(ErrorCode::InvalidArgument, "question is required");
    auto options = qa::AnswerOptions{};
    const auto gw = agent_->gateway();
    const auto dec = json_string(j, "decomposer", gw->has(gateway::ProviderKind::Llm) ? "llm" : "template");
    auto kind = qa::parse_decomposer_kind(dec);
    if (!kind) fail(ErrorCode::InvalidArgument, "decomposer must be llm or template");
    options.decomposer = *kind;
    const auto turn = agent_->handle_turn(sid, question, attachments, options);
    send_json(res, 200, turn_response(sid, turn));
  }));

  svr.Get("/api/v1/logs", guarded([this](const httplib::Request& req, httplib::Response& res) {
    std::uint64_t after = 0;
    std::size_t limit = 500;
    try {
      if (req.has_param("after")) after = std::stoull(req.get_param_value("after"));
      if (req.has_param("limit")) limit = std::min<std::size_t>(5000, std::stoul(req.get_param_value("limit")));
    } catch (const std::exception&) {
      fail(ErrorCode::InvalidArgument, "after and limit must be non-negative integers");
    }
    const auto entries = log_.since(after, limit);
    const auto cursor = entries.empty() ? std::max(after, std::uint64_t{0}) : entries.back().at("seq").get<std::uint64_t>();
    send_json(res, 200, {{"entries", entries}, {"cursor", cursor}});
  }));

  svr.Get("/api/v1/config/models", guarded([this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, model_config());
  }));

  svr.Put("/api/v1/config/models", guarded([this](const httplib::Request& req, httplib::Response& res) {
    set_model_config(body_json(req));
    send_json(res, 200, model_config());
  }));
}

int Service::start(const std::string& host, int port) {
  stop();
  http_ = std::make_unique<httplib::Server>();
  install_routes();
  const int bound = port == 0 ? http_->bind_to_any_port(host) : (http_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) fail(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
  http_thread_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
  log_.emit("service", "listening", {{"host", host}, {"port", bound}});
  return bound;
}

void Service::run(const std::string& host, int port) {
  start(host, port);
  if (http_thread_.joinable()) http_thread_.join();
}

void Service::stop() {
  if (http_) http_->stop();
  if (http_thread_.joinable()) http_thread_.join();
}

bool Service::running() const { return http_ && http_->is_running(); }

}  // namespace straptor::service
