#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gateway/gateway.hpp"
#include "ingest/cell_grid.hpp"
#include "tree/hotree.hpp"

namespace straptor::t2t {

using ingest::CellGrid;
using ingest::Coord;

inline constexpr double kDefaultThreshold = 0.85;

struct MetaCellSet {
  std::set<Coord> cells;
  // Best similarity per scored coordinate; members always have an entry.
  std::map<Coord, double> scores;

  bool contains(std::size_t row, std::size_t col) const { return cells.count(Coord{row, col}) > 0; }
  void add(Coord c, double score) {
    cells.insert(c);
    scores[c] = score;
  }
};

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool operator==(const IndexRange&) const = default;
};

struct Region {
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool operator==(const Region&) const = default;
};

struct NestedRegion {
  Coord coord;
  std::shared_ptr<const CellGrid> grid;
};

struct Partition {
  std::vector<IndexRange> header_rows;
  std::vector<IndexRange> header_cols;
  std::vector<Region> body_blocks;
  std::vector<NestedRegion> nested_regions;
  // Anchors of full-width merged meta cells splitting the body.
  std::vector<Coord> separators;
  // Meta coordinates that fit no header position and were demoted to body.
  std::vector<Coord> demoted;
  std::vector<std::string> warnings;

  std::size_t header_row_count() const { return header_rows.empty() ? 0 : header_rows.back().end; }
  std::size_t header_col_count() const { return header_cols.empty() ? 0 : header_cols.back().end; }
};

enum class BuildMode { ModelAssisted, Heuristic };
std::string_view to_string(BuildMode m) noexcept;
std::optional<BuildMode> parse_build_mode(std::string_view s) noexcept;

struct ConstructionReport {
  std::size_t meta_count = 0;
  std::size_t body_count = 0;
  BuildMode mode = BuildMode::Heuristic;
  double threshold_used = kDefaultThreshold;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
  static ConstructionReport from_json(const nlohmann::json& j);
};

struct BuildOptions {
  BuildMode mode = BuildMode::Heuristic;
  double threshold = kDefaultThreshold;
  std::string tree_id;     // derived from the content when empty
  std::string created_at;  // current time when empty
};

struct BuildResult {
  tree::HOTree tree;
  ConstructionReport report;
};

// Candidate header keys from a VLM reply: keys of a JSON object (nested
// objects included), strings of a JSON array, or "key: value" lines.
// Throws UnparseableCandidates when nothing key-value shaped is found.
std::vector<std::string> parse_candidates(const std::string& reply);

// Asks the VLM for candidate keys (template "detect_meta", one retry with
// "detect_meta.retry"), embeds candidates and cell texts, and keeps cells
// whose best cosine similarity reaches tau.
MetaCellSet detect_meta_cells(const CellGrid& grid, const gateway::Gateway& gw, double tau = kDefaultThreshold);

// Layout rules only: typed header rows on top, header columns on the left,
// full-width merged separators. Scores are 1.0.
MetaCellSet heuristic_meta_fallback(const CellGrid& grid);

Partition partition_table(const CellGrid& grid, const MetaCellSet& meta);

// Throws EmptyGrid for grids without any content.
BuildResult build_hotree(const CellGrid& grid, const MetaCellSet& meta, const BuildOptions& options = {});
// Heuristic mode ignores the gateway (which may be null).
BuildResult build_hotree(const CellGrid& grid, const gateway::Gateway* gw, const BuildOptions& options);

// New Root titled `title`; every input root becomes a Meta child carrying
// its tree's title; ids are prefixed "s<i>." to stay unique.
tree::HOTree merge_sheets(const std::vector<tree::HOTree>& trees, const std::string& title, const std::string& id = {},
                          const std::string& created_at = {});

// One tree per workbook: a single sheet builds directly, several are merged
// under a root titled after the file.
BuildResult build_sheets(const ingest::SheetSet& sheets, const gateway::Gateway* gw, const BuildOptions& options);

std::string tree_title(const CellGrid& grid);

}  // namespace straptor::t2t
