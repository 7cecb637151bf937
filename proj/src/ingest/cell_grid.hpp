#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace straptor::ingest {

class CellGrid;

struct EmptyContent {
  bool operator==(const EmptyContent&) const = default;
};
struct TextContent {
  std::string text;
  bool operator==(const TextContent&) const = default;
};
struct CheckboxContent {
  bool checked = false;
  bool operator==(const CheckboxContent&) const = default;
};
struct ImageContent {
  std::string resource_id;
  bool operator==(const ImageContent&) const = default;
};
struct NestedGridContent {
  std::shared_ptr<const CellGrid> grid;
  bool operator==(const NestedGridContent& other) const;
};

using CellContent = std::variant<EmptyContent, TextContent, CheckboxContent, ImageContent, NestedGridContent>;

constexpr int kMaxNestingDepth = 3;

bool is_empty(const CellContent& c) noexcept;
// Flat text used for labels and similarity: checkboxes become "[x]"/"[ ]",
// images "[image:<id>]", nested grids "[table RxC]".
std::string content_text(const CellContent& c);

struct Cell {
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t row_span = 1;
  std::size_t col_span = 1;
  CellContent content;

  std::size_t row_end() const { return row + row_span; }
  std::size_t col_end() const { return col + col_span; }
  bool covers(std::size_t r, std::size_t c) const { return r >= row && r < row_end() && c >= col && c < col_end(); }
  bool merged() const { return row_span > 1 || col_span > 1; }
  bool operator==(const Cell&) const = default;
};

struct SourceRef {
  std::string file;
  std::string sheet;
  bool operator==(const SourceRef&) const = default;
};

struct Coord {
  std::size_t row = 0;
  std::size_t col = 0;
  auto operator<=>(const Coord&) const = default;
};

// Rectangular grid of anchor cells. Coordinates not covered by any cell are
// implicitly empty; a merged region is a single Cell with spans > 1.
class CellGrid {
 public:
  CellGrid() = default;
  CellGrid(std::size_t rows, std::size_t cols);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  const std::vector<Cell>& cells() const { return cells_; }

  const std::optional<std::string>& title() const { return title_; }
  void set_title(std::optional<std::string> title) { title_ = std::move(title); }
  const SourceRef& source() const { return source_; }
  void set_source(SourceRef source) { source_ = std::move(source); }

  // Throws InvalidGrid on out-of-bounds or overlapping extents.
  void add(Cell cell);
  void add_text(std::size_t row, std::size_t col, std::string text);

  // Cell whose extent covers (row, col), or nullptr.
  const Cell* covering(std::size_t row, std::size_t col) const;
  // Cell anchored exactly at (row, col), or nullptr.
  const Cell* anchored(std::size_t row, std::size_t col) const;
  std::string text_at(std::size_t row, std::size_t col) const;
  // Content of the covering cell; EmptyContent for uncovered coordinates.
  CellContent content_at(std::size_t row, std::size_t col) const;

  // Deepest NestedGrid chain; a flat grid has depth 0.
  int nesting_depth() const;

  // Re-checks every grid invariant; throws InvalidGrid / NestingTooDeep.
  void validate() const;

  bool operator==(const CellGrid& other) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Cell> cells_;
  // index into cells_ per coordinate, -1 when uncovered
  std::vector<long> cover_;
  std::optional<std::string> title_;
  SourceRef source_;
};

struct Sheet {
  std::string name;
  CellGrid grid;
};

struct SheetSet {
  std::vector<Sheet> sheets;
};

}  // namespace straptor::ingest
