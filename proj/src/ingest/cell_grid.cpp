#include "ingest/cell_grid.hpp"

#include <algorithm>

#include "common/error.hpp"

namespace straptor::ingest {

bool NestedGridContent::operator==(const NestedGridContent& other) const {
  if (grid == other.grid) return true;
  if (!grid || !other.grid) return false;
  return *grid == *other.grid;
}

bool is_empty(const CellContent& c) noexcept {
  if (std::holds_alternative<EmptyContent>(c)) return true;
  if (auto* t = std::get_if<TextContent>(&c)) return t->text.empty();
  return false;
}

std::string content_text(const CellContent& c) {
  struct Visitor {
    std::string operator()(const EmptyContent&) const { return {}; }
    std::string operator()(const TextContent& t) const { return t.text; }
    std::string operator()(const CheckboxContent& b) const { return b.checked ? "[x]" : "[ ]"; }
    std::string operator()(const ImageContent& i) const { return "[image:" + i.resource_id + "]"; }
    std::string operator()(const NestedGridContent& n) const {
      if (!n.grid) return "[table]";
      return "[table " + std::to_string(n.grid->rows()) + "x" + std::to_string(n.grid->cols()) + "]";
    }
  };
  return std::visit(Visitor{}, c);
}

CellGrid::CellGrid(std::size_t rows, std::size_t cols)
    : rows_(cols == 0 ? 0 : rows), cols_(rows == 0 ? 0 : cols), cover_(rows_ * cols_, -1) {}

void CellGrid::add(Cell cell) {
  if (cell.row_span == 0 || cell.col_span == 0)
    fail(ErrorCode::InvalidGrid, "cell span must be at least 1");
  if (cell.row_end() > rows_ || cell.col_end() > cols_)
    fail(ErrorCode::InvalidGrid, "cell (" + std::to_string(cell.row) + "," + std::to_string(cell.col) +
                                     ") extends outside the grid");
  for (std::size_t r = cell.row; r < cell.row_end(); ++r)
    for (std::size_t c = cell.col; c < cell.col_end(); ++c)
      if (cover_[r * cols_ + c] >= 0)
        fail(ErrorCode::InvalidGrid,
             "cell extent overlaps at (" + std::to_string(r) + "," + std::to_string(c) + ")");
  const auto index = static_cast<long>(cells_.size());
  for (std::size_t r = cell.row; r < cell.row_end(); ++r)
    for (std::size_t c = cell.col; c < cell.col_end(); ++c) cover_[r * cols_ + c] = index;
  cells_.push_back(std::move(cell));
}

void CellGrid::add_text(std::size_t row, std::size_t col, std::string text) {
  add(Cell{row, col, 1, 1, TextContent{std::move(text)}});
}

const Cell* CellGrid::covering(std::size_t row, std::size_t col) const {
  if (row >= rows_ || col >= cols_) return nullptr;
  const auto idx = cover_[row * cols_ + col];
  return idx < 0 ? nullptr : &cells_[static_cast<std::size_t>(idx)];
}

const Cell* CellGrid::anchored(std::size_t row, std::size_t col) const {
  const auto* cell = covering(row, col);
  return (cell && cell->row == row && cell->col == col) ? cell : nullptr;
}

std::string CellGrid::text_at(std::size_t row, std::size_t col) const {
  const auto* cell = covering(row, col);
  return cell ? content_text(cell->content) : std::string{};
}

CellContent CellGrid::content_at(std::size_t row, std::size_t col) const {
  const auto* cell = covering(row, col);
  return cell ? cell->content : CellContent{EmptyContent{}};
}

int CellGrid::nesting_depth() const {
  int depth = 0;
  for (const auto& cell : cells_)
    if (auto* nested = std::get_if<NestedGridContent>(&cell.content); nested && nested->grid)
      depth = std::max(depth, 1 + nested->grid->nesting_depth());
  return depth;
}

void CellGrid::validate() const {
  std::vector<int> seen(rows_ * cols_, 0);
  for (const auto& cell : cells_) {
    if (cell.row_span == 0 || cell.col_span == 0 || cell.row_end() > rows_ || cell.col_end() > cols_)
      fail(ErrorCode::InvalidGrid, "cell extent out of bounds");
    for (std::size_t r = cell.row; r < cell.row_end(); ++r)
      for (std::size_t c = cell.col; c < cell.col_end(); ++c)
        if (seen[r * cols_ + c]++) fail(ErrorCode::InvalidGrid, "overlapping cell extents");
    if (auto* nested = std::get_if<NestedGridContent>(&cell.content); nested && nested->grid)
      nested->grid->validate();
  }
  if (nesting_depth() > kMaxNestingDepth)
    fail(ErrorCode::NestingTooDeep, "nested grids deeper than " + std::to_string(kMaxNestingDepth));
}

bool CellGrid::operator==(const CellGrid& other) const {
  if (rows_ != other.rows_ || cols_ != other.cols_ || title_ != other.title_ || source_ != other.source_)
    return false;
  // Cells compare as a set keyed by anchor; insertion order is irrelevant.
  if (cells_.size() != other.cells_.size()) return false;
  for (const auto& cell : cells_) {
    const auto* peer = other.anchored(cell.row, cell.col);
    if (!peer || !(*peer == cell)) return false;
  }
  return true;
}

}  // namespace straptor::ingest
