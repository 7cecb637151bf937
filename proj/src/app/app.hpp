#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gateway/gateway.hpp"
#include "qa/qa.hpp"
#include "table2tree/table2tree.hpp"

namespace straptor::app {

using nlohmann::json;

// Reads, parses and builds one input file (images go through the VLM).
// created_at is taken from the file's modification time so repeated runs
// over the same file produce identical bytes.
t2t::BuildResult convert_file(const std::filesystem::path& path, const gateway::Gateway* gw,
                              const t2t::BuildOptions& options);

struct BenchCase {
  std::string table_path;
  std::string question;
  std::string gold_answer;
};

// One JSON object per line; blank lines are skipped. Throws SyntaxError or
// SchemaViolation with the offending line number.
std::vector<BenchCase> parse_bench_cases(const std::string& jsonl);

struct BenchOptions {
  std::filesystem::path dir;  // base for relative table paths
  qa::AnswerOptions answer;
  t2t::BuildOptions build;
  std::size_t jobs = 1;
};

// {total, correct, accuracy, per_case[]}. Trees are built once per path;
// any per-case failure counts as incorrect.
json run_bench(const std::vector<BenchCase>& cases, const gateway::Gateway* gw, const BenchOptions& options);

}  // namespace straptor::app
