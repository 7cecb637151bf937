#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "ingest/cell_grid.hpp"

namespace straptor::ingest {

// Parsers are pure: same bytes, structurally equal grid. None of them set a
// title unless the format carries one (HTML <caption>, a Markdown heading).

CellGrid parse_csv(std::string_view bytes);
CellGrid parse_html(std::string_view bytes);
CellGrid parse_markdown(std::string_view bytes);
SheetSet parse_xlsx(std::string_view bytes);

// Deterministic line-oriented rendering used as the VLM's view of a grid.
std::string render_grid_text(const CellGrid& grid);

enum class InputKind { Csv, Html, Markdown, Xlsx, Image };

std::optional<InputKind> classify_extension(std::string_view file_name);
bool is_image(std::string_view file_name);

// Dispatches on the file extension. Single-grid formats yield one sheet named
// after the file stem; every grid gets its SourceRef filled in.
// Throws UnsupportedFormat for unknown extensions and for images.
SheetSet parse_table_file(std::string_view file_name, std::string_view bytes);

}  // namespace straptor::ingest
