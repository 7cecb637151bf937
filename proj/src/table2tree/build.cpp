#include <algorithm>
#include <functional>

#include "common/error.hpp"
#include "common/text.hpp"
#include "ingest/ingest.hpp"
#include "table2tree/cell_kind.hpp"
#include "table2tree/table2tree.hpp"

namespace straptor::t2t {

using tree::HONode;
using tree::HOTree;
using tree::NodeKind;
using nlohmann::json;

std::string_view to_string(BuildMode m) noexcept {
  return m == BuildMode::ModelAssisted ? "model_assisted" : "heuristic";
}

std::optional<BuildMode> parse_build_mode(std::string_view s) noexcept {
  if (s == "model_assisted") return BuildMode::ModelAssisted;
  if (s == "heuristic") return BuildMode::Heuristic;
  return std::nullopt;
}

json ConstructionReport::to_json() const {
  return json{{"meta_count", meta_count},
              {"body_count", body_count},
              {"mode", std::string(t2t::to_string(mode))},
              {"threshold_used", threshold_used},
              {"warnings", warnings}};
}

ConstructionReport ConstructionReport::from_json(const json& j) {
  ConstructionReport r;
  try {
    r.meta_count = j.at("meta_count").get<std::size_t>();
    r.body_count = j.at("body_count").get<std::size_t>();
    auto mode = parse_build_mode(j.at("mode").get<std::string>());
    if (!mode) fail(ErrorCode::SchemaViolation, "unknown build mode");
    r.mode = *mode;
    r.threshold_used = j.at("threshold_used").get<double>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    fail(ErrorCode::SchemaViolation, std::string("construction report: ") + e.what());
  }
  return r;
}

std::string tree_title(const CellGrid& grid) {
  if (grid.title() && !text::trim(*grid.title()).empty()) return std::string(text::trim(*grid.title()));
  if (!grid.source().sheet.empty()) return grid.source().sheet;
  if (!grid.source().file.empty()) return text::file_stem(grid.source().file);
  return "table";
}

namespace {

using MetaProvider = std::function<MetaCellSet(const CellGrid&)>;

class Builder {
 public:
  Builder(HOTree& tree, MetaProvider meta_for, std::vector<std::string>& warnings)
      : t_(tree), meta_for_(std::move(meta_for)), warnings_(warnings) {}

  std::string add_node(const std::string& parent, NodeKind kind, std::string label,
                       std::optional<tree::Origin> origin) {
    HONode n;
    n.id = "n" + std::to_string(next_++);
    n.kind = kind;
    n.label = std::move(label);
    n.origin = origin;
    const auto id = n.id;
    t_.nodes.emplace(id, std::move(n));
    if (!parent.empty()) t_.nodes.at(parent).children.push_back(id);
    return id;
  }

  void build(const CellGrid& g, const MetaCellSet& meta, const std::string& parent, const std::string& context) {
    const auto p = partition_table(g, meta);
    for (const auto& w : p.warnings) warnings_.push_back(context + w);
    const auto h = p.header_row_count();
    const auto w = p.header_col_count();
    const std::set<Coord> demoted(p.demoted.begin(), p.demoted.end());
    const std::set<Coord> separators(p.separators.begin(), p.separators.end());

    std::vector<const ingest::Cell*> cells;
    for (const auto& c : g.cells())
      if (kind_of(&c) != CellKind::Empty) cells.push_back(&c);
    std::sort(cells.begin(), cells.end(),
              [](const auto* a, const auto* b) { return std::tie(a->row, a->col) < std::tie(b->row, b->col); });

    struct Placed {
      const ingest::Cell* cell;
      std::string id;
    };
    std::vector<Placed> col_headers, row_headers;
    std::vector<std::string> deepest(g.cols());
    std::vector<std::size_t> deepest_row(g.cols(), 0);
    std::string section;

    for (const auto* c : cells) {
      const auto origin = tree::Origin{c->row, c->col, c->row_span, c->col_span};
      const auto label = label_of(*c);
      std::string id;
      if (c->row < h) {
        std::string up = parent;
        std::size_t best = 0;
        for (const auto& ph : col_headers) {
          const auto* a = ph.cell;
          if (a->row_end() <= c->row && a->col <= c->col && a->col_end() >= c->col_end() && a->row_end() >= best) {
            best = a->row_end();
            up = ph.id;
          }
        }
        id = add_node(up, NodeKind::Meta, label, origin);
        col_headers.push_back({c, id});
        for (auto x = c->col; x < c->col_end(); ++x)
          if (deepest[x].empty() || c->row >= deepest_row[x]) {
            deepest[x] = id;
            deepest_row[x] = c->row;
          }
      } else if (separators.count(Coord{c->row, c->col})) {
        id = add_node(parent, NodeKind::Meta, label, origin);
        section = id;
      } else if (c->col < w && !demoted.count(Coord{c->row, c->col})) {
        std::string up;
        std::size_t best = 0;
        for (const auto& ph : row_headers) {
          const auto* a = ph.cell;
          if (a->col_end() <= c->col && a->row <= c->row && c->row < a->row_end() && a->col_end() >= best) {
            best = a->col_end();
            up = ph.id;
          }
        }
        if (up.empty()) up = !section.empty() ? section : !deepest[c->col].empty() ? deepest[c->col] : parent;
        id = add_node(up, NodeKind::Meta, label, origin);
        row_headers.push_back({c, id});
      } else {
        std::string up = deepest[c->col];
        if (up.empty()) {
          std::size_t best = 0;
          for (const auto& ph : row_headers) {
            const auto* a = ph.cell;
            if (a->row <= c->row && c->row < a->row_end() && a->col_end() >= best) {
              best = a->col_end();
              up = ph.id;
            }
          }
        }
        if (up.empty()) up = !section.empty() ? section : parent;
        id = add_node(up, NodeKind::Body, label, origin);
      }
      if (const auto* nested = std::get_if<ingest::NestedGridContent>(&c->content)) {
        const auto& sub = *nested->grid;
        if (sub.rows() > 0 && sub.cols() > 0)
          build(sub, meta_for_(sub), id,
                context + "nested table at (" + std::to_string(c->row) + "," + std::to_string(c->col) + "): ");
      }
    }
  }

 private:
  static std::string label_of(const ingest::Cell& c) {
    if (const auto* t = std::get_if<ingest::TextContent>(&c.content)) return std::string(text::trim(t->text));
    return ingest::content_text(c.content);
  }

  HOTree& t_;
  MetaProvider meta_for_;
  std::vector<std::string>& warnings_;
  std::size_t next_ = 0;
};

bool has_content(const CellGrid& g) {
  return std::any_of(g.cells().begin(), g.cells().end(), [](const auto& c) { return kind_of(&c) != CellKind::Empty; });
}

BuildResult build_with(const CellGrid& grid, const MetaCellSet& meta, const MetaProvider& nested_meta,
                       const BuildOptions& options) {
  if (!has_content(grid)) fail(ErrorCode::EmptyGrid, "the table has no content");
  grid.validate();
  BuildResult out;
  auto& t = out.tree;
  t.title = tree_title(grid);
  t.source = tree::TreeSource{grid.source().file, grid.source().sheet};
  Builder b(t, nested_meta, out.report.warnings);
  t.root = b.add_node({}, NodeKind::Root, t.title, std::nullopt);
  b.build(grid, meta, t.root, "");
  t.id = !options.tree_id.empty()
             ? options.tree_id
             : "t" + text::hex64(text::fnv1a64(ingest::render_grid_text(grid) + '\x1f' + t.source.file + '\x1f' +
                                               t.source.sheet + '\x1f' + t.title));
  t.created_at = !options.created_at.empty() ? options.created_at : tree::utc_timestamp_now();
  tree::validate(t);
  out.report.meta_count = t.count(NodeKind::Meta);
  out.report.body_count = t.count(NodeKind::Body);
  out.report.mode = options.mode;
  out.report.threshold_used = options.mode == BuildMode::Heuristic ? 1.0 : options.threshold;
  return out;
}

}  // namespace

BuildResult build_hotree(const CellGrid& grid, const MetaCellSet& meta, const BuildOptions& options) {
  return build_with(grid, meta, heuristic_meta_fallback, options);
}

BuildResult build_hotree(const CellGrid& grid, const gateway::Gateway* gw, const BuildOptions& options) {
  if (options.mode == BuildMode::Heuristic) return build_with(grid, heuristic_meta_fallback(grid), heuristic_meta_fallback, options);
  if (!gw || !gw->has(gateway::ProviderKind::Vlm) || !gw->has(gateway::ProviderKind::Embedding))
    fail(ErrorCode::InvalidConfig, "model-assisted construction needs vlm and embedding providers");
  if (!(options.threshold > 0.0 && options.threshold <= 1.0))
    fail(ErrorCode::InvalidArgument, "similarity threshold must lie in (0, 1]");
  const double tau = options.threshold;
  if (!has_content(grid)) fail(ErrorCode::EmptyGrid, "the table has no content");
  MetaProvider detect = [gw, tau](const CellGrid& g) { return detect_meta_cells(g, *gw, tau); };
  return build_with(grid, detect(grid), detect, options);
}

HOTree merge_sheets(const std::vector<HOTree>& trees, const std::string& title, const std::string& id,
                    const std::string& created_at) {
  if (trees.empty()) fail(ErrorCode::EmptyInput, "no trees to merge");
  HOTree out;
  out.title = title;
  out.root = "n0";
  out.source = tree::TreeSource{trees.front().source.file, ""};
  HONode root;
  root.id = out.root;
  root.kind = NodeKind::Root;
  root.label = title;
  std::string fingerprint = title;
  for (std::size_t i = 0; i < trees.size(); ++i) {
    const auto& t = trees[i];
    const auto prefix = "s" + std::to_string(i) + ".";
    fingerprint += '\x1f' + t.id;
    for (const auto& [nid, n] : t.nodes) {
      HONode copy = n;
      copy.id = prefix + nid;
      for (auto& c : copy.children) c = prefix + c;
      if (nid == t.root) {
        copy.kind = NodeKind::Meta;
        copy.label = t.title;
        copy.field_type.reset();
        copy.origin.reset();
        root.children.push_back(copy.id);
      }
      out.nodes.emplace(copy.id, std::move(copy));
    }
  }
  out.nodes.emplace(root.id, std::move(root));
  out.id = !id.empty() ? id : "t" + text::hex64(text::fnv1a64(fingerprint));
  out.created_at = !created_at.empty() ? created_at : tree::utc_timestamp_now();
  tree::validate(out);
  return out;
}

BuildResult build_sheets(const ingest::SheetSet& sheets, const gateway::Gateway* gw, const BuildOptions& options) {
  std::vector<const ingest::Sheet*> usable;
  std::vector<std::string> warnings;
  for (const auto& s : sheets.sheets) {
    if (has_content(s.grid)) usable.push_back(&s);
    else warnings.push_back("sheet '" + s.name + "' is empty and was skipped");
  }
  if (usable.empty()) fail(ErrorCode::EmptyGrid, "the workbook has no content");
  if (usable.size() == 1 && sheets.sheets.size() == 1) return build_hotree(usable.front()->grid, gw, options);

  std::vector<HOTree> trees;
  BuildResult out;
  for (const auto* s : usable) {
    auto sub_options = options;
    sub_options.tree_id.clear();
    auto r = build_hotree(s->grid, gw, sub_options);
    for (auto& w : r.report.warnings) warnings.push_back("sheet '" + s->name + "': " + w);
    trees.push_back(std::move(r.tree));
  }
  const auto& file = usable.front()->grid.source().file;
  out.tree = merge_sheets(trees, file.empty() ? "workbook" : text::file_stem(file), options.tree_id, options.created_at);
  out.report.meta_count = out.tree.count(NodeKind::Meta);
  out.report.body_count = out.tree.count(NodeKind::Body);
  out.report.mode = options.mode;
  out.report.threshold_used = options.mode == BuildMode::Heuristic ? 1.0 : options.threshold;
  out.report.warnings = std::move(warnings);
  return out;
}

}  // namespace straptor::t2t
