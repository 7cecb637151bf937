#include "straptor/straptor.h"

#include <cstring>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>

#include "app/app.hpp"
#include "common/error.hpp"
#include "service/service.hpp"
#include "tree/edits.hpp"
#include "tree/serialize.hpp"

using namespace straptor;

struct straptor_gateway {
  std::shared_ptr<const gateway::Gateway> gw;
};

struct straptor_tree {
  tree::HOTree tree;
};

struct straptor_server {
  std::unique_ptr<service::Service> svc;
};

namespace {

static_assert(static_cast<int>(ErrorCode::Internal) + 1 == STRAPTOR_INTERNAL);

thread_local std::string last_error;

straptor_status status_of(ErrorCode c) { return static_cast<straptor_status>(static_cast<int>(c) + 1); }

straptor_status record(straptor_status s, std::string message) {
  last_error = std::move(message);
  return s;
}

template <class F>
straptor_status guard(F&& f) {
  try {
    f();
    last_error.clear();
    return STRAPTOR_OK;
  } catch (const Error& e) {
    return record(status_of(e.code()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return record(STRAPTOR_SYNTAX_ERROR, e.what());
  } catch (const std::bad_alloc&) {
    return record(STRAPTOR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return record(STRAPTOR_INTERNAL, e.what());
  } catch (...) {
    return record(STRAPTOR_INTERNAL, "unknown failure");
  }
}

char* dup(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size());
  out[s.size()] = '\0';
  return out;
}

void require(const void* p, const char* what) {
  if (!p) fail(ErrorCode::InvalidArgument, std::string(what) + " must not be NULL");
}

std::string slurp(const char* path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, std::string("cannot read ") + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

qa::DecomposerKind decomposer_of(const char* s) {
  if (!s) return qa::DecomposerKind::Template;
  auto k = qa::parse_decomposer_kind(s);
  if (!k) fail(ErrorCode::InvalidArgument, std::string("unknown decomposer '") + s + "'");
  return *k;
}

const gateway::Gateway* raw(const straptor_gateway* gw) { return gw ? gw->gw.get() : nullptr; }

}  // namespace

extern "C" {

const char* straptor_status_string(straptor_status status) {
  if (status == STRAPTOR_OK) return "Ok";
  if (status < STRAPTOR_OK || status > STRAPTOR_INTERNAL) return "Unknown";
  return to_string(static_cast<ErrorCode>(static_cast<int>(status) - 1)).data();
}

int straptor_status_is_model_error(straptor_status status) {
  if (status <= STRAPTOR_OK || status > STRAPTOR_INTERNAL) return 0;
  return is_model_error(static_cast<ErrorCode>(static_cast<int>(status) - 1)) ? 1 : 0;
}

const char* straptor_last_error(void) { return last_error.c_str(); }

const char* straptor_version(void) { return "0.1.0"; }

void straptor_string_free(char* s) { std::free(s); }

straptor_status straptor_gateway_open(const char* config_path, straptor_gateway** out) {
  return guard([&] {
    require(out, "out");
    *out = nullptr;
    gateway::GatewayConfig cfg;
    if (config_path) cfg = gateway::GatewayConfig::from_file(config_path);
    auto h = std::make_unique<straptor_gateway>();
    h->gw = std::make_shared<const gateway::Gateway>(cfg);
    *out = h.release();
  });
}

void straptor_gateway_free(straptor_gateway* gw) { delete gw; }

straptor_status straptor_tree_convert_file(const char* path, const char* mode, double tau, const straptor_gateway* gw,
                                           straptor_tree** out, char** report_json) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    if (report_json) *report_json = nullptr;
    t2t::BuildOptions opts;
    if (mode) {
      auto m = std::string(mode) == "model" ? std::optional(t2t::BuildMode::ModelAssisted) : t2t::parse_build_mode(mode);
      if (!m) fail(ErrorCode::InvalidArgument, std::string("unknown mode '") + mode + "'");
      opts.mode = *m;
    }
    if (!(tau >= 0 && tau <= 1)) fail(ErrorCode::InvalidArgument, "tau must lie in [0, 1]");
    opts.threshold = tau;
    if (opts.mode == t2t::BuildMode::ModelAssisted && !raw(gw))
      fail(ErrorCode::InvalidConfig, "model mode needs a gateway configuration");
    auto built = app::convert_file(path, raw(gw), opts);
    auto h = std::make_unique<straptor_tree>();
    h->tree = std::move(built.tree);
    char* report = report_json ? dup(built.report.to_json().dump(2)) : nullptr;
    if (report_json) *report_json = report;
    *out = h.release();
  });
}

straptor_status straptor_tree_from_json(const char* json, size_t len, straptor_tree** out) {
  return guard([&] {
    require(json, "json");
    require(out, "out");
    *out = nullptr;
    auto h = std::make_unique<straptor_tree>();
    h->tree = tree::deserialize(std::string_view(json, len));
    *out = h.release();
  });
}

straptor_status straptor_tree_load_file(const char* path, straptor_tree** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    auto h = std::make_unique<straptor_tree>();
    h->tree = tree::deserialize(slurp(path));
    *out = h.release();
  });
}

straptor_status straptor_tree_to_json(const straptor_tree* t, char** out) {
  return guard([&] {
    require(t, "tree");
    require(out, "out");
    *out = dup(tree::serialize(t->tree));
  });
}

straptor_status straptor_tree_save_file(const straptor_tree* t, const char* path) {
  return guard([&] {
    require(t, "tree");
    require(path, "path");
    service::write_atomic(path, tree::serialize(t->tree));
  });
}

straptor_status straptor_tree_apply_edits(straptor_tree* t, const char* edits_json) {
  return guard([&] {
    require(t, "tree");
    require(edits_json, "edits_json");
    const auto j = nlohmann::json::parse(edits_json, nullptr, false);
    if (j.is_discarded()) fail(ErrorCode::SyntaxError, "edits are not valid JSON");
    t->tree = tree::apply_edits(t->tree, tree::edits_from_json(j));
  });
}

void straptor_tree_free(straptor_tree* t) { delete t; }

straptor_status straptor_ask(const straptor_tree* t, const char* question, const char* decomposer,
                             const straptor_gateway* gw, char** answer_json) {
  return guard([&] {
    require(t, "tree");
    require(question, "question");
    require(answer_json, "answer_json");
    *answer_json = nullptr;
    qa::AnswerOptions o;
    o.decomposer = decomposer_of(decomposer);
    *answer_json = dup(qa::answer(question, t->tree, raw(gw), o).to_json().dump());
  });
}

straptor_status straptor_bench(const char* cases_path, const char* dir, const char* decomposer, size_t jobs,
                               const straptor_gateway* gw, char** report_json) {
  return guard([&] {
    require(cases_path, "cases_path");
    require(report_json, "report_json");
    *report_json = nullptr;
    app::BenchOptions o;
    o.dir = dir ? std::filesystem::path(dir) : std::filesystem::path(cases_path).parent_path();
    o.answer.decomposer = decomposer_of(decomposer);
    o.jobs = jobs;
    const auto report = app::run_bench(app::parse_bench_cases(slurp(cases_path)), raw(gw), o);
    *report_json = dup(report.dump(2));
  });
}

straptor_status straptor_server_start(const char* data_dir, const char* config_path, const char* host, int port,
                                      straptor_server** out, int* bound_port) {
  return guard([&] {
    require(data_dir, "data_dir");
    require(out, "out");
    *out = nullptr;
    if (port < 0 || port > 65535) fail(ErrorCode::InvalidArgument, "port must lie in [0, 65535]");
    service::ServiceOptions o;
    o.data_dir = data_dir;
    if (config_path) o.config_file = config_path;
    o.log_echo = &std::clog;
    auto h = std::make_unique<straptor_server>();
    h->svc = std::make_unique<service::Service>(o);
    const int bound = h->svc->start(host ? host : "127.0.0.1", port);
    if (bound_port) *bound_port = bound;
    *out = h.release();
  });
}

int straptor_server_running(const straptor_server* s) { return s && s->svc->running() ? 1 : 0; }

straptor_status straptor_server_wait(straptor_server* s) {
  return guard([&] {
    require(s, "server");
    while (s->svc->running()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  });
}

void straptor_server_stop(straptor_server* s) {
  if (s) s->svc->stop();
}

void straptor_server_free(straptor_server* s) { delete s; }

}  // extern "C"
