#include <algorithm>
#include <memory>
#include <string>
#include <vector>

#include "common/error.hpp"
#include "common/text.hpp"
#include "ingest/ingest.hpp"
#include "ingest/markup.hpp"

namespace straptor::ingest {

namespace {

using markup::Token;

struct PendingCell {
  std::size_t row = 0;
  std::size_t row_span = 1;
  std::size_t col_span = 1;
  bool row_span_to_end = false;
  CellContent content;
};

std::size_t span_attr(const Token& tag, const char* key) {
  const auto raw = tag.attr(key, "1");
  try {
    const long v = std::stol(raw);
    if (v <= 0) return 0;  // rowspan=0 means "to the end of the section"
    return static_cast<std::size_t>(std::min(v, 1000L));
  } catch (...) {
    return 1;
  }
}

class TableReader {
 public:
  explicit TableReader(const std::vector<Token>& tokens) : tokens_(tokens) {}

  // `pos` points at a <table> start tag; on return it points past </table>.
  CellGrid read_table(std::size_t& pos, int depth) {
    if (depth > kMaxNestingDepth) fail(ErrorCode::NestingTooDeep, "HTML tables nested too deeply");
    ++pos;
    std::vector<std::vector<PendingCell>> rows;
    std::optional<std::string> caption;
    bool in_row = false;

    while (pos < tokens_.size()) {
      const auto& t = tokens_[pos];
      if (t.is_end("table")) {
        ++pos;
        return assemble(rows, caption);
      }
      if (t.is_start("caption")) {
        caption = read_caption(pos);
        continue;
      }
      if (t.is_start("tr")) {
        rows.emplace_back();
        in_row = true;
        ++pos;
        continue;
      }
      if (t.is_end("tr")) {
        in_row = false;
        ++pos;
        continue;
      }
      if (t.is_start("td") || t.is_start("th")) {
        if (!in_row) {
          rows.emplace_back();
          in_row = true;
        }
        rows.back().push_back(read_cell(pos, depth));
        continue;
      }
      if (t.is_start("table")) {  // stray table outside any cell: treat as a cell
        if (!in_row) {
          rows.emplace_back();
          in_row = true;
        }
        PendingCell cell;
        cell.content = NestedGridContent{std::make_shared<CellGrid>(read_table(pos, depth + 1))};
        rows.back().push_back(std::move(cell));
        continue;
      }
      ++pos;
    }
    fail(ErrorCode::MalformedMarkup, "<table> is never closed");
  }

 private:
  std::string read_caption(std::size_t& pos) {
    std::string text;
    ++pos;
    while (pos < tokens_.size() && !tokens_[pos].is_end("caption") && !tokens_[pos].is_start("tr") &&
           !tokens_[pos].is_end("table")) {
      if (tokens_[pos].kind == Token::Kind::Text) text += tokens_[pos].text;
      ++pos;
    }
    if (pos < tokens_.size() && tokens_[pos].is_end("caption")) ++pos;
    return text::collapse_whitespace(text);
  }

  PendingCell read_cell(std::size_t& pos, int depth) {
    const auto& open = tokens_[pos];
    const std::string tag = open.name;
    PendingCell cell;
    cell.row_span = span_attr(open, "rowspan");
    cell.col_span = std::max<std::size_t>(1, span_attr(open, "colspan"));
    if (cell.row_span == 0) {
      cell.row_span = 1;
      cell.row_span_to_end = true;
    }
    ++pos;

    std::string text;
    std::shared_ptr<const CellGrid> nested;
    std::optional<bool> checkbox;
    std::optional<std::string> image;

    while (pos < tokens_.size()) {
      const auto& t = tokens_[pos];
      if (t.is_end(tag) || t.is_end("td") || t.is_end("th")) {
        ++pos;
        break;
      }
      if (t.is_start("td") || t.is_start("th") || t.is_start("tr") || t.is_end("tr") || t.is_end("table"))
        break;  // implicitly closed
      if (t.is_start("table")) {
        auto inner = read_table(pos, depth + 1);
        if (!nested) nested = std::make_shared<CellGrid>(std::move(inner));
        continue;
      }
      if (t.kind == Token::Kind::Text) {
        text += t.text;
      } else if (t.is_start("br") || t.is_start("p") || t.is_start("div") || t.is_start("li")) {
        text += ' ';
      } else if (t.is_start("input") && text::to_lower(t.attr("type")) == "checkbox") {
        checkbox = t.attrs.count("checked") > 0;
      } else if (t.is_start("img")) {
        image = t.attr("src", t.attr("alt"));
      }
      ++pos;
    }

    auto flat = text::collapse_whitespace(text);
    if (nested) {
      cell.content = NestedGridContent{std::move(nested)};
    } else if (checkbox && flat.empty()) {
      cell.content = CheckboxContent{*checkbox};
    } else if (checkbox) {
      cell.content = TextContent{std::string(*checkbox ? "[x] " : "[ ] ") + flat};
    } else if (image && flat.empty()) {
      cell.content = ImageContent{*image};
    } else if (!flat.empty()) {
      cell.content = TextContent{std::move(flat)};
    }
    return cell;
  }

  // Standard HTML table placement: each cell takes the next free slot in its
  // row; spans are clipped where they would run into an occupied slot.
  static CellGrid assemble(std::vector<std::vector<PendingCell>>& rows, const std::optional<std::string>& caption) {
    const std::size_t row_count = rows.size();
    std::vector<std::vector<bool>> taken(row_count);
    auto occupied = [&](std::size_t r, std::size_t c) { return c < taken[r].size() && taken[r][c]; };
    auto mark = [&](std::size_t r, std::size_t c) {
      if (taken[r].size() <= c) taken[r].resize(c + 1, false);
      taken[r][c] = true;
    };

    struct Placed {
      std::size_t row, col, row_span, col_span;
      CellContent content;
    };
    std::vector<Placed> placed;
    std::size_t cols = 0;
    for (std::size_t r = 0; r < row_count; ++r) {
      std::size_t c = 0;
      for (auto& cell : rows[r]) {
        while (occupied(r, c)) ++c;
        std::size_t rs = cell.row_span_to_end ? row_count - r : std::min(cell.row_span, row_count - r);
        std::size_t cs = 1;
        while (cs < cell.col_span && !occupied(r, c + cs)) ++cs;
        // shrink rowspan until the whole rectangle is free
        for (std::size_t k = 1; k < rs; ++k) {
          bool free = true;
          for (std::size_t j = 0; j < cs; ++j) free = free && !occupied(r + k, c + j);
          if (!free) {
            rs = k;
            break;
          }
        }
        for (std::size_t k = 0; k < rs; ++k)
          for (std::size_t j = 0; j < cs; ++j) mark(r + k, c + j);
        cols = std::max(cols, c + cs);
        placed.push_back({r, c, rs, cs, std::move(cell.content)});
        c += cs;
      }
    }
    if (row_count == 0 || cols == 0) fail(ErrorCode::MalformedMarkup, "<table> contains no cells");

    CellGrid grid(row_count, cols);
    for (auto& p : placed) {
      if (is_empty(p.content) && p.row_span == 1 && p.col_span == 1) continue;
      grid.add(Cell{p.row, p.col, p.row_span, p.col_span, std::move(p.content)});
    }
    if (caption && !caption->empty()) grid.set_title(caption);
    return grid;
  }

  const std::vector<Token>& tokens_;
};

}  // namespace

CellGrid parse_html(std::string_view bytes) {
  if (!text::is_valid_utf8(bytes)) fail(ErrorCode::InvalidEncoding, "HTML input is not valid UTF-8");
  const auto tokens = markup::tokenize(text::strip_bom(bytes), markup::Dialect::Html);
  for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
    if (!tokens[pos].is_start("table")) continue;
    TableReader reader(tokens);
    auto grid = reader.read_table(pos, 0);
    if (!grid.title()) {
      // fall back to the document <title>, if any
      for (std::size_t i = 0; i + 1 < tokens.size(); ++i)
        if (tokens[i].is_start("title") && tokens[i + 1].kind == markup::Token::Kind::Text) {
          auto t = text::collapse_whitespace(tokens[i + 1].text);
          if (!t.empty()) grid.set_title(t);
          break;
        }
    }
    return grid;
  }
  fail(ErrorCode::NoTableFound, "no <table> element in HTML input");
}

}  // namespace straptor::ingest
