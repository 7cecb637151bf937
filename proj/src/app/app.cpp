#include "app/app.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "agent/agent.hpp"
#include "common/error.hpp"
#include "ingest/ingest.hpp"

namespace straptor::app {

namespace fs = std::filesystem;

namespace {

std::string mtime_utc(const fs::path& p) {
  std::error_code ec;
  const auto ft = fs::last_write_time(p, ec);
  if (ec) return "1970-01-01T00:00:00Z";
  const auto sys = std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::file_clock::to_sys(ft));
  const std::time_t t = std::chrono::system_clock::to_time_t(sys);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

t2t::BuildResult convert_file(const fs::path& path, const gateway::Gateway* gw, const t2t::BuildOptions& options) {
  if (!fs::is_regular_file(path)) fail(ErrorCode::Io, "no such file: " + path.string());
  auto opts = options;
  if (opts.created_at.empty()) opts.created_at = mtime_utc(path);
  const auto name = path.filename().string();
  t2t::BuildResult built;
  if (ingest::is_image(name)) {
    built = agent::extract_table_image({fs::absolute(path).string(), name}, gw, opts);
  } else {
    built = t2t::build_sheets(ingest::parse_table_file(name, slurp(path)), gw, opts);
  }
  built.tree = qa::tag_field_types(built.tree);
  return built;
}

std::vector<BenchCase> parse_bench_cases(const std::string& jsonl) {
  std::vector<BenchCase> out;
  std::istringstream in(jsonl);
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded()) fail(ErrorCode::SyntaxError, "cases line " + std::to_string(n) + " is not valid JSON");
    const auto field = [&](const char* key) {
      if (!j.is_object() || !j.contains(key) || !j[key].is_string())
        fail(ErrorCode::SchemaViolation, "cases line " + std::to_string(n) + " lacks string field '" + key + "'");
      return j[key].get<std::string>();
    };
    out.push_back({field("table_path"), field("question"), field("gold_answer")});
  }
  return out;
}

json run_bench(const std::vector<BenchCase>& cases, const gateway::Gateway* gw, const BenchOptions& options) {
  struct Built {
    std::optional<tree::HOTree> tree;
    std::string error;
  };
  std::map<std::string, Built> trees;
  for (const auto& c : cases) {
    if (trees.count(c.table_path)) continue;
    auto& b = trees[c.table_path];
    try {
      fs::path p(c.table_path);
      if (p.is_relative()) p = options.dir / p;
      b.tree = convert_file(p, gw, options.build).tree;
    } catch (const Error& e) {
      b.error = std::string(to_string(e.code())) + ": " + e.what();
    } catch (const std::exception& e) {
      b.error = std::string("Internal: ") + e.what();
    }
  }

  std::vector<json> per_case(cases.size());
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < cases.size(); i = next++) {
      const auto& c = cases[i];
      json r{{"index", i}, {"table_path", c.table_path}, {"question", c.question}, {"gold_answer", c.gold_answer}};
      const auto& b = trees.at(c.table_path);
      if (!b.tree) {
        r["answer"] = nullptr;
        r["confidence"] = 0.0;
        r["correct"] = false;
        r["error"] = b.error;
      } else {
        const auto a = qa::answer(c.question, *b.tree, gw, options.answer);
        r["answer"] = a.text;
        r["confidence"] = a.confidence;
        r["correct"] = !a.error && qa::answer_texts_agree(c.gold_answer, a.text);
        r["error"] = a.error ? json(std::string(to_string(*a.error))) : json(nullptr);
      }
      per_case[i] = std::move(r);
    }
  };
  const auto n = std::max<std::size_t>(1, std::min(options.jobs, cases.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  std::size_t correct = 0;
  for (const auto& r : per_case) correct += r["correct"].get<bool>();
  return {{"total", cases.size()},
          {"correct", correct},
          {"accuracy", cases.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(cases.size())},
          {"per_case", per_case}};
}

}  // namespace straptor::app
