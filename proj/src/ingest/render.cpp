#include <string>

#include "ingest/ingest.hpp"

namespace straptor::ingest {

namespace {

// Text is escaped so that every unescaped '[' in the output is markup; this
// keeps the rendering injective.
void append_escaped(std::string& out, std::string_view s) {
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '[': out += "\\["; break;
      default: out.push_back(c);
    }
  }
}

void render_into(std::string& out, const CellGrid& grid, int depth) {
  const std::string indent(static_cast<std::size_t>(depth) * 4, ' ');
  for (std::size_t r = 0; r < grid.rows(); ++r) {
    out += indent;
    std::vector<const CellGrid*> nested_in_row;
    for (std::size_t c = 0; c < grid.cols(); ++c) {
      if (c) out.push_back('\t');
      const Cell* cell = grid.anchored(r, c);
      if (!cell) continue;  // empty or shadowed by a merged anchor
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, TextContent>) {
              append_escaped(out, v.text);
            } else if constexpr (std::is_same_v<T, CheckboxContent>) {
              out += v.checked ? "[x]" : "[ ]";
            } else if constexpr (std::is_same_v<T, ImageContent>) {
              out += "[img:";
              append_escaped(out, v.resource_id);
              out += "]";
            } else if constexpr (std::is_same_v<T, NestedGridContent>) {
              const auto rows = v.grid ? v.grid->rows() : 0;
              const auto cols = v.grid ? v.grid->cols() : 0;
              out += "[grid " + std::to_string(rows) + "x" + std::to_string(cols) + "]";
              if (v.grid) nested_in_row.push_back(v.grid.get());
            }
          },
          cell->content);
      if (cell->merged())
        out += "[" + std::to_string(cell->row_span) + "x" + std::to_string(cell->col_span) + "]";
    }
    out.push_back('\n');
    for (const auto* nested : nested_in_row) render_into(out, *nested, depth + 1);
  }
}

}  // namespace

std::string render_grid_text(const CellGrid& grid) {
  std::string out;
  render_into(out, grid, 0);
  return out;
}

}  // namespace straptor::ingest
