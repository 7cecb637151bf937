#include <algorithm>
#include <regex>

#include "common/error.hpp"
#include "common/text.hpp"
#include "ingest/ingest.hpp"
#include "table2tree/cell_kind.hpp"
#include "table2tree/table2tree.hpp"
#include "tree/numeric.hpp"

namespace straptor::t2t {

using nlohmann::json;

CellKind kind_of(const ingest::Cell* cell) {
  if (!cell || ingest::is_empty(cell->content)) return CellKind::Empty;
  if (const auto* t = std::get_if<ingest::TextContent>(&cell->content)) {
    if (text::trim(t->text).empty()) return CellKind::Empty;
    return tree::parse_number(t->text) ? CellKind::Number : CellKind::Text;
  }
  return CellKind::Other;
}

namespace {

void collect_keys(const json& j, std::vector<std::string>& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) {
      out.push_back(k);
      collect_keys(v, out);
    }
  } else if (j.is_array()) {
    for (const auto& v : j) {
      if (v.is_string()) out.push_back(v.get<std::string>());
      else collect_keys(v, out);
    }
  }
}

std::optional<json> embedded_json(const std::string& reply) {
  for (auto [open, close] : {std::pair{'{', '}'}, std::pair{'[', ']'}}) {
    const auto b = reply.find(open);
    const auto e = reply.rfind(close);
    if (b == std::string::npos || e == std::string::npos || e < b) continue;
    auto j = json::parse(reply.begin() + static_cast<std::ptrdiff_t>(b),
                         reply.begin() + static_cast<std::ptrdiff_t>(e) + 1, nullptr, false);
    if (!j.is_discarded()) return j;
  }
  return std::nullopt;
}

}  // namespace

std::vector<std::string> parse_candidates(const std::string& reply) {
  std::vector<std::string> raw;
  if (auto j = embedded_json(reply)) {
    collect_keys(*j, raw);
  } else {
    static const std::regex kv(R"(^\s*(?:[-*]\s*)?["']?([^:="'\n]{1,80}?)["']?\s*[:=]\s*(.*)$)");
    std::size_t lines = 0, matched = 0;
    for (const auto& line : text::split(reply, '\n')) {
      if (text::trim(line).empty()) continue;
      ++lines;
      std::smatch m;
      if (std::regex_match(line, m, kv)) {
        ++matched;
        raw.push_back(m[1].str());
      }
    }
    if (matched == 0 || matched * 2 < lines)
      fail(ErrorCode::UnparseableCandidates, "model reply does not list header keys");
  }
  std::vector<std::string> out;
  for (const auto& r : raw) {
    auto k = text::collapse_whitespace(r);
    if (!k.empty() && std::find(out.begin(), out.end(), k) == out.end()) out.push_back(std::move(k));
  }
  return out;
}

MetaCellSet detect_meta_cells(const CellGrid& grid, const gateway::Gateway& gw, double tau) {
  const auto rendered = ingest::render_grid_text(grid);
  gateway::ChatRequest req;
  req.template_id = "detect_meta";
  req.salient_args = {rendered};
  req.prompt =
      "List the header (meta-information) cells of the table below as a JSON object mapping each header "
      "text to an example value. Reply with JSON only.\n\n" +
      rendered;
  std::vector<std::string> candidates;
  try {
    candidates = parse_candidates(gw.complete(gateway::ProviderKind::Vlm, req));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::UnparseableCandidates) throw;
    req.template_id = "detect_meta.retry";
    req.prompt = "Your previous reply was not valid. Reply with a single JSON object whose keys are the header "
                 "cells of this table and nothing else.\n\n" +
                 rendered;
    candidates = parse_candidates(gw.complete(gateway::ProviderKind::Vlm, req));
  }

  MetaCellSet out;
  if (candidates.empty()) return out;

  std::vector<const ingest::Cell*> cells;
  std::vector<std::string> texts = candidates;
  for (const auto& c : grid.cells()) {
    if (std::holds_alternative<ingest::NestedGridContent>(c.content) || kind_of(&c) == CellKind::Empty) continue;
    cells.push_back(&c);
    texts.push_back(text::collapse_whitespace(ingest::content_text(c.content)));
  }
  if (cells.empty()) return out;
  const auto vectors = gw.embed(texts);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    double best = 0.0;
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      try {
        best = std::max(best, gateway::cosine_similarity(vectors[candidates.size() + i], vectors[k]));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ZeroVector) throw;
      }
    }
    best = std::clamp(best, 0.0, 1.0);
    const Coord at{cells[i]->row, cells[i]->col};
    out.scores[at] = best;
    if (best >= tau - 1e-12) out.cells.insert(at);
  }
  return out;
}

namespace {

class Heuristic {
 public:
  explicit Heuristic(const CellGrid& g) : g_(g) {}

  MetaCellSet run() {
    MetaCellSet m;
    if (g_.rows() == 0 || g_.cols() == 0) return m;
    const auto h = header_rows();
    const auto w = header_cols(h);
    for (const auto& c : g_.cells()) {
      if (kind_of(&c) == CellKind::Empty) continue;
      const bool top = c.row < h;
      const bool left = c.row >= h && c.col < w;
      if (top || left || separator(c, h, w) || full_height(c, h, w)) m.add(Coord{c.row, c.col}, 1.0);
    }
    return m;
  }

 private:
  // A number spanning several columns ("2024" over its quarters) reads as a
  // label.
  static CellKind label_kind(const ingest::Cell* cell) {
    const auto k = kind_of(cell);
    return k == CellKind::Number && cell->col_span > 1 ? CellKind::Text : k;
  }
  CellKind at(std::size_t r, std::size_t c) const { return label_kind(g_.covering(r, c)); }

  // Non-empty and nothing but labels.
  bool row_is_text(std::size_t r) const {
    bool any = false;
    for (std::size_t c = 0; c < g_.cols(); ++c) {
      const auto k = at(r, c);
      if (k == CellKind::Empty) continue;
      if (k != CellKind::Text) return false;
      any = true;
    }
    return any;
  }

  bool typed_below(std::size_t r) const {
    for (std::size_t c = 0; c < g_.cols(); ++c) {
      if (at(r, c) != CellKind::Text) continue;
      for (std::size_t b = r + 1; b < g_.rows(); ++b) {
        const auto* cell = g_.covering(b, c);
        if (!cell || cell->row <= r) continue;
        const auto k = kind_of(cell);
        if (k == CellKind::Number || k == CellKind::Other) return true;
      }
    }
    return false;
  }

  // All-text tables: a complete row of distinct labels that never repeat in
  // their column is taken as the header.
  bool label_row(std::size_t r) const {
    std::vector<std::string> seen;
    for (std::size_t c = 0; c < g_.cols(); ++c) {
      const auto* cell = g_.covering(r, c);
      if (label_kind(cell) != CellKind::Text) return false;
      if (cell->col != c) continue;
      const auto label = text::collapse_whitespace(ingest::content_text(cell->content));
      if (std::find(seen.begin(), seen.end(), label) != seen.end()) return false;
      seen.push_back(label);
      for (const auto& other : g_.cells()) {
        if (other.row <= r || other.col_end() <= cell->col || other.col >= cell->col_end()) continue;
        if (text::collapse_whitespace(ingest::content_text(other.content)) == label) return false;
      }
    }
    return true;
  }

  std::size_t header_rows() const {
    const auto rows = g_.rows();
    if (rows < 2 || !row_is_text(0) || !(typed_below(0) || label_row(0))) return 0;
    std::size_t h = 1;
    auto has_hmerge = [&](std::size_t r) {
      return std::any_of(g_.cells().begin(), g_.cells().end(),
                         [&](const ingest::Cell& c) { return c.row == r && c.col_span > 1 && kind_of(&c) != CellKind::Empty; });
    };
    while (h + 1 < rows && has_hmerge(h - 1) && row_is_text(h)) ++h;
    // Header cells that extend downwards pull their rows in.
    for (const auto& c : g_.cells())
      if (c.row < h && kind_of(&c) != CellKind::Empty) h = std::max(h, std::min(c.row_end(), rows - 1));
    return h;
  }

  bool column_is_text(std::size_t c, std::size_t from) const {
    bool any = false;
    for (std::size_t r = from; r < g_.rows(); ++r) {
      const auto* cell = g_.covering(r, c);
      if (cell && cell->row < from) continue;
      const auto k = kind_of(cell);
      if (k == CellKind::Empty) continue;
      if (k != CellKind::Text) return false;
      any = true;
    }
    return any;
  }

  bool has_vmerge(std::size_t c, std::size_t from) const {
    return std::any_of(g_.cells().begin(), g_.cells().end(), [&](const ingest::Cell& cell) {
      return cell.col == c && cell.row >= from && cell.row_span > 1 && kind_of(&cell) != CellKind::Empty;
    });
  }

  bool typed_right(std::size_t c) const {
    for (std::size_t r = 0; r < g_.rows(); ++r) {
      if (at(r, c) != CellKind::Text) continue;
      for (std::size_t x = c + 1; x < g_.cols(); ++x) {
        const auto* cell = g_.covering(r, x);
        if (!cell || cell->col <= c) continue;
        const auto k = kind_of(cell);
        if (k == CellKind::Number || k == CellKind::Other) return true;
      }
    }
    return false;
  }

  std::size_t header_cols(std::size_t h) const {
    std::size_t w = 0;
    if (h == 0) {
      while (w + 1 < g_.cols() && column_is_text(w, 0) && typed_right(w)) ++w;
      return w;
    }
    if (g_.cols() < 2 || !column_is_text(0, h) || !has_vmerge(0, h)) return 0;
    w = 1;
    while (w + 1 < g_.cols() && has_vmerge(w - 1, h) && column_is_text(w, h)) ++w;
    return w;
  }

  bool separator(const ingest::Cell& c, std::size_t h, std::size_t w) const {
    if (c.row < h || c.col_span < 2 || c.col > w || c.col_end() != g_.cols()) return false;
    if (kind_of(&c) != CellKind::Text) return false;
    for (std::size_t r = c.row; r < c.row_end(); ++r)
      for (std::size_t x = 0; x < c.col; ++x)
        if (at(r, x) != CellKind::Empty) return false;
    return true;
  }

  bool full_height(const ingest::Cell& c, std::size_t h, std::size_t w) const {
    return c.row == h && c.row_span > 1 && c.row_end() == g_.rows() && c.col >= w && kind_of(&c) == CellKind::Text &&
           g_.rows() - h > 1;
  }

  const CellGrid& g_;
};

}  // namespace

MetaCellSet heuristic_meta_fallback(const CellGrid& grid) { return Heuristic(grid).run(); }

}  // namespace straptor::t2t
