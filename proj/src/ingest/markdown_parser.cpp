#include <regex>
#include <string>
#include <vector>

#include "common/error.hpp"
#include "common/text.hpp"
#include "ingest/ingest.hpp"

namespace straptor::ingest {

namespace {

std::vector<std::string> pipe_cells(std::string_view line) {
  auto body = text::trim(line);
  if (!body.empty() && body.front() == '|') body.remove_prefix(1);
  if (!body.empty() && body.back() == '|' && (body.size() < 2 || body[body.size() - 2] != '\\'))
    body.remove_suffix(1);
  std::vector<std::string> cells;
  std::string cur;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] == '\\' && i + 1 < body.size() && body[i + 1] == '|') {
      cur.push_back('|');
      ++i;
    } else if (body[i] == '|') {
      cells.emplace_back(text::trim(cur));
      cur.clear();
    } else {
      cur.push_back(body[i]);
    }
  }
  cells.emplace_back(text::trim(cur));
  return cells;
}

bool is_delimiter_row(const std::string& line) {
  static const std::regex re(R"(^\s*\|?\s*:?-+:?\s*(\|\s*:?-+:?\s*)*\|?\s*$)");
  return line.find('-') != std::string::npos && std::regex_match(line, re);
}

}  // namespace

CellGrid parse_markdown(std::string_view bytes) {
  if (!text::is_valid_utf8(bytes)) fail(ErrorCode::InvalidEncoding, "Markdown input is not valid UTF-8");
  std::vector<std::string> lines;
  for (auto& l : text::split(text::strip_bom(bytes), '\n')) {
    if (!l.empty() && l.back() == '\r') l.pop_back();
    lines.push_back(std::move(l));
  }

  std::optional<std::string> heading;
  for (std::size_t i = 0; i + 1 < lines.size(); ++i) {
    const auto trimmed = text::trim(lines[i]);
    if (!trimmed.empty() && trimmed.front() == '#') {
      auto h = trimmed;
      while (!h.empty() && h.front() == '#') h.remove_prefix(1);
      heading = std::string(text::trim(h));
      continue;
    }
    if (lines[i].find('|') == std::string::npos || !is_delimiter_row(lines[i + 1])) continue;

    std::vector<std::vector<std::string>> rows{pipe_cells(lines[i])};
    for (std::size_t j = i + 2; j < lines.size(); ++j) {
      if (text::trim(lines[j]).empty() || lines[j].find('|') == std::string::npos) break;
      rows.push_back(pipe_cells(lines[j]));
    }
    std::size_t cols = 0;
    for (const auto& r : rows) cols = std::max(cols, r.size());
    CellGrid grid(rows.size(), cols);
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < rows[r].size(); ++c)
        if (!rows[r][c].empty()) grid.add_text(r, c, rows[r][c]);
    if (heading && !heading->empty()) grid.set_title(heading);
    return grid;
  }
  fail(ErrorCode::NoTableFound, "no pipe table found in Markdown input");
}

}  // namespace straptor::ingest
