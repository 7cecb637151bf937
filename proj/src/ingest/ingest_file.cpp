#include "common/error.hpp"
#include "common/text.hpp"
#include "ingest/ingest.hpp"

namespace straptor::ingest {

std::optional<InputKind> classify_extension(std::string_view file_name) {
  const auto ext = text::file_extension_lower(file_name);
  if (ext == ".csv") return InputKind::Csv;
  if (ext == ".html" || ext == ".htm") return InputKind::Html;
  if (ext == ".md") return InputKind::Markdown;
  if (ext == ".xlsx") return InputKind::Xlsx;
  if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") return InputKind::Image;
  return std::nullopt;
}

bool is_image(std::string_view file_name) { return classify_extension(file_name) == InputKind::Image; }

SheetSet parse_table_file(std::string_view file_name, std::string_view bytes) {
  const auto kind = classify_extension(file_name);
  if (!kind || *kind == InputKind::Image)
    fail(ErrorCode::UnsupportedFormat, "unsupported table format: '" + std::string(file_name) + "'");

  const auto stem = text::file_stem(file_name);
  SheetSet set;
  if (*kind == InputKind::Xlsx) {
    set = parse_xlsx(bytes);
  } else {
    CellGrid grid = *kind == InputKind::Csv    ? parse_csv(bytes)
                    : *kind == InputKind::Html ? parse_html(bytes)
                                               : parse_markdown(bytes);
    set.sheets.push_back(Sheet{stem, std::move(grid)});
  }
  for (auto& sheet : set.sheets) {
    auto source = sheet.grid.source();
    source.file = std::string(file_name);
    if (*kind == InputKind::Xlsx) source.sheet = sheet.name;
    sheet.grid.set_source(std::move(source));
  }
  return set;
}

}  // namespace straptor::ingest
