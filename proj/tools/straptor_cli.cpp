#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "straptor/straptor.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitModel = 2;
constexpr int kExitUnanswerable = 3;

std::atomic<bool> interrupted{false};

int report(straptor_status s, const std::string& context) {
  std::cerr << "error: " << context << ": " << straptor_status_string(s) << ": " << straptor_last_error() << "\n";
  return straptor_status_is_model_error(s) || s == STRAPTOR_UNPARSEABLE_CANDIDATES ? kExitModel : kExitFailure;
}

bool is_model_error_name(const std::string& name) {
  for (int s = STRAPTOR_OK + 1; s <= STRAPTOR_INTERNAL; ++s)
    if (name == straptor_status_string(static_cast<straptor_status>(s)))
      return straptor_status_is_model_error(static_cast<straptor_status>(s)) != 0;
  return false;
}

std::string take(char* s) {
  std::string out = s ? s : "";
  straptor_string_free(s);
  return out;
}

struct GatewayHandle {
  straptor_gateway* gw = nullptr;
  ~GatewayHandle() { straptor_gateway_free(gw); }
};

struct TreeHandle {
  straptor_tree* tree = nullptr;
  ~TreeHandle() { straptor_tree_free(tree); }
};

straptor_status open_gateway(const std::string& config, GatewayHandle& h) {
  if (config.empty()) return STRAPTOR_OK;
  return straptor_gateway_open(config.c_str(), &h.gw);
}

fs::path report_path_for(const fs::path& out) {
  auto name = out.filename().string();
  const std::string suffix = ".hotree.json";
  if (name.size() > suffix.size() && name.ends_with(suffix)) name.resize(name.size() - suffix.size());
  else if (name.ends_with(".json")) name.resize(name.size() - 5);
  return out.parent_path() / (name + ".report.json");
}

struct ConvertArgs {
  std::string input;
  std::string mode = "heuristic";
  double tau = 1.0;
  std::string config;
  std::string output;
};

int cmd_convert(const ConvertArgs& a) {
  GatewayHandle gw;
  if (auto s = open_gateway(a.config, gw); s != STRAPTOR_OK) return report(s, "config");
  TreeHandle t;
  char* report_json = nullptr;
  if (auto s = straptor_tree_convert_file(a.input.c_str(), a.mode.c_str(), a.tau, gw.gw, &t.tree, &report_json);
      s != STRAPTOR_OK)
    return report(s, a.input);
  const auto report_text = take(report_json);
  const fs::path out = a.output.empty() ? fs::path(fs::path(a.input).stem().string() + ".hotree.json") : fs::path(a.output);
  if (auto s = straptor_tree_save_file(t.tree, out.string().c_str()); s != STRAPTOR_OK) return report(s, out.string());
  const auto rpath = report_path_for(out);
  std::ofstream r(rpath, std::ios::binary);
  r << report_text << "\n";
  if (!r) {
    std::cerr << "error: cannot write " << rpath.string() << "\n";
    return kExitFailure;
  }
  std::cout << out.string() << "\n";
  std::cerr << "report: " << rpath.string() << "\n";
  return kExitOk;
}

struct AskArgs {
  std::string tree;
  std::string question;
  std::string decomposer;
  std::string config;
  bool show_trace = false;
};

void print_trace(const json& a) {
  const auto& plan = a["plan"];
  const auto& trace = a["trace"];
  std::cout << "sub-questions:\n";
  if (plan.is_object()) {
    for (const auto& step : plan["steps"]) {
      std::cout << "  " << step["id"].get<std::size_t>() << ". " << step["op"].get<std::string>();
      const auto note = step.value("note", "");
      if (!note.empty()) std::cout << ": " << note;
      std::cout << "\n";
    }
  }
  if (trace.contains("failure") && !trace["failure"].is_null())
    std::cout << "failed at step " << trace["failure"]["step"] << ": " << trace["failure"]["code"].get<std::string>()
              << ": " << trace["failure"]["message"].get<std::string>() << "\n";
  std::cout << "retrieval path:";
  for (const auto& n : a["retrieval_path"]) std::cout << " " << n.get<std::string>();
  std::cout << "\n";
}

int cmd_ask(const AskArgs& a) {
  GatewayHandle gw;
  if (auto s = open_gateway(a.config, gw); s != STRAPTOR_OK) return report(s, "config");
  TreeHandle t;
  if (auto s = straptor_tree_load_file(a.tree.c_str(), &t.tree); s != STRAPTOR_OK) return report(s, a.tree);
  const auto decomposer = a.decomposer.empty() ? std::string(a.config.empty() ? "template" : "llm") : a.decomposer;
  char* out = nullptr;
  if (auto s = straptor_ask(t.tree, a.question.c_str(), decomposer.c_str(), gw.gw, &out); s != STRAPTOR_OK)
    return report(s, "ask");
  const auto answer = json::parse(take(out));
  std::cout << answer["text"].get<std::string>() << "\n";
  std::cout << "confidence: " << answer["confidence"].dump() << "\n";
  if (a.show_trace) print_trace(answer);
  std::cerr << "elapsed_ms: " << answer.value("elapsed_ms", 0.0) << "\n";
  if (answer["confidence"].get<double>() <= 0) {
    if (answer["error"].is_string() && is_model_error_name(answer["error"].get<std::string>())) return kExitModel;
    return kExitUnanswerable;
  }
  return kExitOk;
}

struct BenchArgs {
  std::string dir;
  std::string cases;
  std::string report;
  std::string decomposer;
  std::string config;
  std::size_t jobs = 1;
};

int cmd_bench(const BenchArgs& a) {
  GatewayHandle gw;
  if (auto s = open_gateway(a.config, gw); s != STRAPTOR_OK) return report(s, "config");
  const auto decomposer = a.decomposer.empty() ? std::string(a.config.empty() ? "template" : "llm") : a.decomposer;
  char* out = nullptr;
  if (auto s = straptor_bench(a.cases.c_str(), a.dir.empty() ? nullptr : a.dir.c_str(), decomposer.c_str(), a.jobs,
                              gw.gw, &out);
      s != STRAPTOR_OK)
    return report(s, a.cases);
  const auto text = take(out);
  if (a.report.empty()) {
    std::cout << text << "\n";
  } else {
    std::ofstream f(a.report, std::ios::binary);
    f << text << "\n";
    if (!f) {
      std::cerr << "error: cannot write " << a.report << "\n";
      return kExitFailure;
    }
  }
  const auto j = json::parse(text);
  std::cerr << "accuracy: " << j["accuracy"].get<double>() << " (" << j["correct"] << "/" << j["total"] << ")\n";
  return kExitOk;
}

struct ServeArgs {
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string data_dir = "data";
  std::string config;
};

int cmd_serve(const ServeArgs& a) {
  straptor_server* server = nullptr;
  int bound = 0;
  if (auto s = straptor_server_start(a.data_dir.c_str(), a.config.empty() ? nullptr : a.config.c_str(), a.host.c_str(),
                                     a.port, &server, &bound);
      s != STRAPTOR_OK)
    return report(s, "serve");
  std::signal(SIGINT, [](int) { interrupted = true; });
  std::signal(SIGTERM, [](int) { interrupted = true; });
  std::cerr << "listening on http://" << a.host << ":" << bound << "\n";
  while (!interrupted && straptor_server_running(server)) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  straptor_server_stop(server);
  straptor_server_free(server);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tables to HO-Trees, question answering and the HTTP service"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(straptor_version()));

  ConvertArgs conv;
  auto* convert = app.add_subcommand("convert", "Build an HO-Tree from a table file");
  convert->add_option("input", conv.input, "csv, xlsx, html, md or image file")->required();
  convert->add_option("--mode", conv.mode, "heuristic or model")->check(CLI::IsMember({"heuristic", "model"}));
  convert->add_option("--tau", conv.tau, "meta-cell similarity threshold")->check(CLI::Range(0.0, 1.0));
  convert->add_option("--config", conv.config, "model configuration file");
  convert->add_option("-o,--output", conv.output, "tree file (default <stem>.hotree.json)");

  AskArgs ask;
  auto* ask_cmd = app.add_subcommand("ask", "Answer one question over a tree file");
  ask_cmd->add_option("--tree", ask.tree, "tree file")->required();
  ask_cmd->add_option("--question", ask.question, "question text")->required();
  ask_cmd->add_option("--decomposer", ask.decomposer, "template or llm")->check(CLI::IsMember({"template", "llm"}));
  ask_cmd->add_option("--config", ask.config, "model configuration file");
  ask_cmd->add_flag("--show-trace", ask.show_trace, "print sub-questions and the retrieval path");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Score answers against gold answers");
  bench_cmd->add_option("--cases", bench.cases, "JSON lines of {table_path, question, gold_answer}")->required();
  bench_cmd->add_option("--dir", bench.dir, "base directory for table paths");
  bench_cmd->add_option("--report", bench.report, "report file (default stdout)");
  bench_cmd->add_option("--decomposer", bench.decomposer, "template or llm")->check(CLI::IsMember({"template", "llm"}));
  bench_cmd->add_option("--config", bench.config, "model configuration file");
  bench_cmd->add_option("--jobs", bench.jobs, "parallel cases")->check(CLI::Range(1, 256));

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--port", serve.port, "port (0 picks a free one)")->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--host", serve.host, "bind address");
  serve_cmd->add_option("--data-dir", serve.data_dir, "trees, sessions, uploads and logs");
  serve_cmd->add_option("--config", serve.config, "model configuration file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitFailure;
  }
  if (*convert) return cmd_convert(conv);
  if (*ask_cmd) return cmd_ask(ask);
  if (*bench_cmd) return cmd_bench(bench);
  return cmd_serve(serve);
}
