#include <algorithm>

#include "common/error.hpp"
#include "common/text.hpp"
#include "table2tree/cell_kind.hpp"
#include "table2tree/table2tree.hpp"

namespace straptor::t2t {

namespace {

std::string where(const ingest::Cell& c) {
  return "(" + std::to_string(c.row) + "," + std::to_string(c.col) + ") '" +
         text::collapse_whitespace(ingest::content_text(c.content)) + "'";
}

}  // namespace

Partition partition_table(const CellGrid& grid, const MetaCellSet& meta) {
  Partition p;
  const auto rows = grid.rows();
  const auto cols = grid.cols();
  for (const auto& c : meta.cells)
    if (c.row >= rows || c.col >= cols) fail(ErrorCode::InvalidArgument, "meta coordinate outside the grid");

  auto is_meta = [&](const ingest::Cell* c) {
    if (!c) return false;
    if (meta.contains(c->row, c->col)) return true;
    for (auto it = meta.cells.lower_bound(Coord{c->row, 0}); it != meta.cells.end() && it->row < c->row_end(); ++it)
      if (c->covers(it->row, it->col)) return true;
    return false;
  };
  auto filled = [&](std::size_t r, std::size_t c) { return kind_of(grid.covering(r, c)) != CellKind::Empty; };

  std::size_t h = 0;
  for (; h < rows; ++h) {
    bool any = false, all = true;
    for (std::size_t c = 0; c < cols; ++c) {
      if (!filled(h, c)) continue;
      any = true;
      all = all && is_meta(grid.covering(h, c));
    }
    if (!any || !all) break;
  }

  std::set<std::size_t> separator_rows;
  for (const auto& c : grid.cells()) {
    if (c.row < h || c.col_span < 2 || c.col_end() != cols || !is_meta(&c) || kind_of(&c) == CellKind::Empty) continue;
    bool clear = true;
    for (std::size_t r = c.row; r < c.row_end() && clear; ++r)
      for (std::size_t x = 0; x < c.col && clear; ++x) clear = !filled(r, x);
    if (!clear) continue;
    p.separators.push_back(Coord{c.row, c.col});
    for (std::size_t r = c.row; r < c.row_end(); ++r) separator_rows.insert(r);
  }
  std::sort(p.separators.begin(), p.separators.end());

  std::size_t w = 0;
  for (; w < cols; ++w) {
    bool any = false, all = true;
    for (std::size_t r = h; r < rows; ++r) {
      if (separator_rows.count(r) || !filled(r, w)) continue;
      any = true;
      all = all && is_meta(grid.covering(r, w));
    }
    if (!any || !all) break;
  }

  if (h > 0) p.header_rows.push_back(IndexRange{0, h});
  if (w > 0) p.header_cols.push_back(IndexRange{0, w});

  std::size_t start = h;
  auto close_block = [&](std::size_t end) {
    if (end > start && w < cols) p.body_blocks.push_back(Region{start, w, end - start, cols - w});
  };
  for (std::size_t r = h; r < rows; ++r) {
    if (!separator_rows.count(r)) continue;
    close_block(r);
    start = r + 1;
  }
  close_block(rows);

  for (const auto& c : grid.cells()) {
    if (const auto* n = std::get_if<ingest::NestedGridContent>(&c.content))
      p.nested_regions.push_back(NestedRegion{Coord{c.row, c.col}, n->grid});
    if (c.row < h || c.col < w || separator_rows.count(c.row) || !is_meta(&c)) continue;
    p.demoted.push_back(Coord{c.row, c.col});
    p.warnings.push_back("meta cell " + where(c) + " lies inside the body and is kept as a value");
  }
  std::sort(p.demoted.begin(), p.demoted.end());
  return p;
}

}  // namespace straptor::t2t
