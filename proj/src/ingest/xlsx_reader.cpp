#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "common/error.hpp"
#include "common/text.hpp"
#include "ingest/ingest.hpp"
#include "ingest/markup.hpp"
#include "ingest/zip_archive.hpp"

namespace straptor::ingest {

namespace {

using markup::Token;

std::vector<Token> xml(const std::string& body) { return markup::tokenize(body, markup::Dialect::Xml); }

// "B12" -> (11, 1); "$B$12" accepted. Returns false on malformed refs.
bool parse_cell_ref(std::string_view ref, std::size_t& row, std::size_t& col) {
  std::size_t i = 0;
  std::size_t c = 0;
  if (i < ref.size() && ref[i] == '$') ++i;
  const auto letters = i;
  while (i < ref.size() && std::isalpha(static_cast<unsigned char>(ref[i]))) {
    c = c * 26 + static_cast<std::size_t>(std::toupper(static_cast<unsigned char>(ref[i])) - 'A' + 1);
    ++i;
  }
  if (i == letters) return false;
  if (i < ref.size() && ref[i] == '$') ++i;
  std::size_t r = 0;
  const auto digits = i;
  while (i < ref.size() && std::isdigit(static_cast<unsigned char>(ref[i]))) r = r * 10 + static_cast<std::size_t>(ref[i++] - '0');
  if (i == digits || i != ref.size() || r == 0) return false;
  row = r - 1;
  col = c - 1;
  return true;
}

std::string resolve_target(const std::string& base_dir, const std::string& target) {
  if (!target.empty() && target.front() == '/') return target.substr(1);
  std::vector<std::string> parts = text::split(base_dir, '/');
  if (!parts.empty() && parts.back().empty()) parts.pop_back();
  for (const auto& seg : text::split(target, '/')) {
    if (seg == "..") {
      if (!parts.empty()) parts.pop_back();
    } else if (!seg.empty() && seg != ".") {
      parts.push_back(seg);
    }
  }
  return text::join(parts, "/");
}

std::map<std::string, std::string> read_relationships(const ZipArchive& zip, const std::string& rels_path,
                                                      const std::string& base_dir,
                                                      std::map<std::string, std::string>* types = nullptr) {
  std::map<std::string, std::string> out;
  auto body = zip.read(rels_path);
  if (!body) return out;
  for (const auto& t : xml(*body)) {
    if (t.kind != Token::Kind::StartTag || t.name != "Relationship") continue;
    const auto id = t.attr("Id");
    out[id] = resolve_target(base_dir, t.attr("Target"));
    if (types) (*types)[id] = t.attr("Type");
  }
  return out;
}

std::vector<std::string> read_shared_strings(const ZipArchive& zip, const std::string& path) {
  std::vector<std::string> strings;
  auto body = zip.read(path);
  if (!body) return strings;
  const auto tokens = xml(*body);
  std::string current;
  bool in_si = false, in_t = false, in_phonetic = false;
  for (const auto& t : tokens) {
    if (t.is_start("si")) {
      in_si = true;
      current.clear();
    } else if (t.is_end("si")) {
      strings.push_back(current);
      in_si = false;
    } else if (t.is_start("rPh")) {
      in_phonetic = true;
    } else if (t.is_end("rPh")) {
      in_phonetic = false;
    } else if (t.is_start("t") && !t.self_closing) {
      in_t = true;
    } else if (t.is_end("t")) {
      in_t = false;
    } else if (t.kind == Token::Kind::Text && in_si && in_t && !in_phonetic) {
      current += t.text;
    }
  }
  return strings;
}

// Number formats by cellXfs index; only what affects display text is kept.
struct NumberFormat {
  enum class Kind { General, Fixed, Percent, Date } kind = Kind::General;
  int decimals = 0;
  bool thousands = false;
  std::string prefix;
};

NumberFormat classify_format_code(const std::string& code) {
  NumberFormat f;
  std::string plain;  // format code without quoted literals and bracketed sections
  bool quoted = false;
  int bracket = 0;
  for (char c : code.substr(0, code.find(';'))) {
    if (c == '"') quoted = !quoted;
    else if (!quoted && c == '[') ++bracket;
    else if (!quoted && c == ']') --bracket;
    else if (!quoted && bracket == 0) plain.push_back(c);
  }
  if (code.find("[$$") != std::string::npos || plain.find('$') != std::string::npos) f.prefix = "$";
  const auto lower = text::to_lower(plain);
  if (lower.find('y') != std::string::npos || (lower.find('d') != std::string::npos && lower.find('m') != std::string::npos)) {
    f.kind = NumberFormat::Kind::Date;
    return f;
  }
  if (plain.find('0') == std::string::npos && plain.find('#') == std::string::npos) return f;
  f.kind = plain.find('%') != std::string::npos ? NumberFormat::Kind::Percent : NumberFormat::Kind::Fixed;
  f.thousands = plain.find(',') != std::string::npos;
  const auto dot = plain.find('.');
  if (dot != std::string::npos)
    for (std::size_t i = dot + 1; i < plain.size() && plain[i] == '0'; ++i) ++f.decimals;
  return f;
}

NumberFormat builtin_format(int id) {
  switch (id) {
    case 1: return classify_format_code("0");
    case 2: return classify_format_code("0.00");
    case 3: return classify_format_code("#,##0");
    case 4: return classify_format_code("#,##0.00");
    case 9: return classify_format_code("0%");
    case 10: return classify_format_code("0.00%");
    default:
      if ((id >= 14 && id <= 17) || id == 22) return classify_format_code("yyyy-mm-dd");
      return {};
  }
}

std::vector<NumberFormat> read_styles(const ZipArchive& zip, const std::string& path) {
  std::vector<NumberFormat> by_xf;
  auto body = zip.read(path);
  if (!body) return by_xf;
  std::map<int, std::string> custom;
  bool in_cell_xfs = false;
  for (const auto& t : xml(*body)) {
    if (t.is_start("numFmt")) {
      custom[std::atoi(t.attr("numFmtId").c_str())] = t.attr("formatCode");
    } else if (t.is_start("cellXfs")) {
      in_cell_xfs = !t.self_closing;
    } else if (t.is_end("cellXfs")) {
      in_cell_xfs = false;
    } else if (in_cell_xfs && t.is_start("xf")) {
      const int id = std::atoi(t.attr("numFmtId", "0").c_str());
      auto it = custom.find(id);
      by_xf.push_back(it != custom.end() ? classify_format_code(it->second) : builtin_format(id));
    }
  }
  return by_xf;
}

std::string group_thousands(std::string digits) {
  const bool neg = !digits.empty() && digits.front() == '-';
  if (neg) digits.erase(0, 1);
  const auto dot = digits.find('.');
  std::string int_part = digits.substr(0, dot);
  const std::string frac = dot == std::string::npos ? "" : digits.substr(dot);
  for (int i = static_cast<int>(int_part.size()) - 3; i > 0; i -= 3) int_part.insert(static_cast<std::size_t>(i), ",");
  return (neg ? "-" : "") + int_part + frac;
}

std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string excel_serial_to_date(double serial) {
  // 1900 date system: serial 25569 = 1970-01-01
  const long days = static_cast<long>(std::floor(serial)) - 25569;
  long z = days + 719468;
  const long era = (z >= 0 ? z : z - 146096) / 146097;
  const long doe = z - era * 146097;
  const long yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  long y = yoe + era * 400;
  const long doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const long mp = (5 * doy + 2) / 153;
  const long d = doy - (153 * mp + 2) / 5 + 1;
  const long m = mp + (mp < 10 ? 3 : -9);
  if (m <= 2) ++y;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04ld-%02ld-%02ld", y, m, d);
  return buf;
}

std::string display_numeric(const std::string& raw, const NumberFormat* fmt) {
  double v = 0;
  try {
    std::size_t used = 0;
    v = std::stod(raw, &used);
    if (used != raw.size()) return raw;
  } catch (...) {
    return raw;
  }
  if (!fmt || fmt->kind == NumberFormat::Kind::General) return fmt && !fmt->prefix.empty() ? fmt->prefix + text::shortest_decimal(v) : text::shortest_decimal(v);
  switch (fmt->kind) {
    case NumberFormat::Kind::Percent:
      return format_fixed(v * 100, fmt->decimals) + "%";
    case NumberFormat::Kind::Date:
      return excel_serial_to_date(v);
    case NumberFormat::Kind::Fixed: {
      auto s = format_fixed(v, fmt->decimals);
      if (fmt->thousands) s = group_thousands(s);
      if (!fmt->prefix.empty()) s = s.front() == '-' ? "-" + fmt->prefix + s.substr(1) : fmt->prefix + s;
      return s;
    }
    default:
      return text::shortest_decimal(v);
  }
}

struct RawCell {
  std::size_t row, col;
  CellContent content;
};

CellGrid read_sheet(const ZipArchive& zip, const std::string& path, const std::vector<std::string>& shared,
                    const std::vector<NumberFormat>& styles) {
  auto body = zip.read(path);
  if (!body) fail(ErrorCode::CorruptWorkbook, "missing worksheet part " + path);
  const auto tokens = xml(*body);

  std::vector<RawCell> cells;
  struct Merge {
    std::size_t r0, c0, r1, c1;
  };
  std::vector<Merge> merges;
  std::size_t next_row = 0;

  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    if (t.is_start("row")) {
      const auto r = t.attr("r");
      next_row = r.empty() ? next_row : static_cast<std::size_t>(std::stoul(r)) - 1;
      continue;
    }
    if (t.is_end("row")) {
      ++next_row;
      continue;
    }
    if (t.is_start("mergeCell")) {
      const auto ref = t.attr("ref");
      const auto colon = ref.find(':');
      Merge m{};
      if (colon == std::string::npos || !parse_cell_ref(ref.substr(0, colon), m.r0, m.c0) ||
          !parse_cell_ref(ref.substr(colon + 1), m.r1, m.c1))
        fail(ErrorCode::CorruptWorkbook, "bad merge range '" + ref + "'");
      merges.push_back(m);
      continue;
    }
    if (!t.is_start("c")) continue;

    std::size_t row = next_row, col = 0;
    if (const auto ref = t.attr("r"); !ref.empty() && !parse_cell_ref(ref, row, col))
      fail(ErrorCode::CorruptWorkbook, "bad cell reference '" + ref + "'");
    const auto type = t.attr("t", "n");
    const auto style = t.attr("s");
    std::string value;
    bool has_value = false;
    if (!t.self_closing) {
      bool in_v = false, in_t = false;
      for (++i; i < tokens.size() && !tokens[i].is_end("c"); ++i) {
        const auto& u = tokens[i];
        if (u.is_start("v")) in_v = !u.self_closing;
        else if (u.is_end("v")) in_v = false;
        else if (u.is_start("t")) in_t = !u.self_closing;
        else if (u.is_end("t")) in_t = false;
        else if (u.kind == Token::Kind::Text && (in_v || in_t)) {
          value += u.text;
          has_value = true;
        }
      }
    }
    if (!has_value) continue;

    std::string display;
    if (type == "s") {
      const auto idx = static_cast<std::size_t>(std::stoul(value));
      if (idx >= shared.size()) fail(ErrorCode::CorruptWorkbook, "shared string index out of range");
      display = shared[idx];
    } else if (type == "b") {
      display = value == "1" ? "TRUE" : "FALSE";
    } else if (type == "n") {
      const NumberFormat* fmt = nullptr;
      if (!style.empty()) {
        const auto xf = static_cast<std::size_t>(std::stoul(style));
        if (xf < styles.size()) fmt = &styles[xf];
      }
      display = display_numeric(value, fmt);
    } else {  // str, inlineStr, e
      display = value;
    }
    if (!display.empty()) cells.push_back({row, col, TextContent{std::move(display)}});
  }

  std::size_t rows = 0, cols = 0;
  for (const auto& c : cells) {
    rows = std::max(rows, c.row + 1);
    cols = std::max(cols, c.col + 1);
  }
  for (const auto& m : merges) {
    rows = std::max(rows, m.r1 + 1);
    cols = std::max(cols, m.c1 + 1);
  }

  CellGrid grid(rows, cols);
  std::set<std::pair<std::size_t, std::size_t>> consumed;
  std::map<std::pair<std::size_t, std::size_t>, CellContent> content;
  for (auto& c : cells) content[{c.row, c.col}] = std::move(c.content);
  for (const auto& m : merges) {
    if (m.r1 < m.r0 || m.c1 < m.c0) fail(ErrorCode::CorruptWorkbook, "inverted merge range");
    Cell anchor{m.r0, m.c0, m.r1 - m.r0 + 1, m.c1 - m.c0 + 1, EmptyContent{}};
    if (auto it = content.find({m.r0, m.c0}); it != content.end()) anchor.content = it->second;
    for (std::size_t r = m.r0; r <= m.r1; ++r)
      for (std::size_t c = m.c0; c <= m.c1; ++c) consumed.insert({r, c});
    grid.add(std::move(anchor));  // overlapping merges surface as InvalidGrid
  }
  for (auto& [coord, value] : content)
    if (!consumed.count(coord)) grid.add(Cell{coord.first, coord.second, 1, 1, std::move(value)});
  return grid;
}

// Checkbox form controls (ctrlProps) linked to a cell via fmlaLink.
std::map<std::pair<std::size_t, std::size_t>, bool> read_checkboxes(const ZipArchive& zip, const std::string& sheet_path) {
  std::map<std::pair<std::size_t, std::size_t>, bool> out;
  const auto slash = sheet_path.rfind('/');
  const std::string dir = sheet_path.substr(0, slash);
  const std::string rels = dir + "/_rels/" + sheet_path.substr(slash + 1) + ".rels";
  std::map<std::string, std::string> types;
  for (const auto& [id, target] : read_relationships(zip, rels, dir, &types)) {
    if (types[id].find("ctrlProp") == std::string::npos) continue;
    auto body = zip.read(target);
    if (!body) continue;
    for (const auto& t : xml(*body)) {
      if (!t.is_start("formControl") || t.attr("objectType") != "CheckBox") continue;
      std::size_t r = 0, c = 0;
      auto link = t.attr("fmlaLink");
      if (const auto bang = link.find('!'); bang != std::string::npos) link = link.substr(bang + 1);
      if (parse_cell_ref(link, r, c)) out[{r, c}] = t.attr("checked") == "Checked";
    }
  }
  return out;
}

CellGrid apply_checkboxes(const CellGrid& grid, const std::map<std::pair<std::size_t, std::size_t>, bool>& boxes) {
  if (boxes.empty()) return grid;
  std::size_t rows = grid.rows(), cols = grid.cols();
  for (const auto& [coord, _] : boxes) {
    rows = std::max(rows, coord.first + 1);
    cols = std::max(cols, coord.second + 1);
  }
  CellGrid out(rows, cols);
  for (const auto& cell : grid.cells()) {
    Cell copy = cell;
    if (auto it = boxes.find({cell.row, cell.col}); it != boxes.end()) copy.content = CheckboxContent{it->second};
    out.add(std::move(copy));
  }
  for (const auto& [coord, checked] : boxes)
    if (!out.covering(coord.first, coord.second)) out.add(Cell{coord.first, coord.second, 1, 1, CheckboxContent{checked}});
  return out;
}

}  // namespace

namespace {

SheetSet parse_workbook(std::string_view bytes) {
  ZipArchive zip(bytes);
  if (!zip.contains("xl/workbook.xml")) fail(ErrorCode::CorruptWorkbook, "archive has no xl/workbook.xml");

  std::map<std::string, std::string> types;
  const auto workbook_rels = read_relationships(zip, "xl/_rels/workbook.xml.rels", "xl", &types);
  std::string shared_path = "xl/sharedStrings.xml", styles_path = "xl/styles.xml";
  for (const auto& [id, target] : workbook_rels) {
    if (types[id].ends_with("/sharedStrings")) shared_path = target;
    if (types[id].ends_with("/styles")) styles_path = target;
  }
  const auto shared = read_shared_strings(zip, shared_path);
  const auto styles = read_styles(zip, styles_path);

  SheetSet set;
  std::set<std::string> names;
  for (const auto& t : xml(*zip.read("xl/workbook.xml"))) {
    if (!t.is_start("sheet")) continue;
    const auto name = t.attr("name");
    auto it = workbook_rels.find(t.attr("r:id"));
    if (it == workbook_rels.end()) fail(ErrorCode::CorruptWorkbook, "sheet '" + name + "' has no relationship");
    if (!names.insert(name).second) fail(ErrorCode::CorruptWorkbook, "duplicate sheet name '" + name + "'");
    auto grid = apply_checkboxes(read_sheet(zip, it->second, shared, styles), read_checkboxes(zip, it->second));
    grid.set_source(SourceRef{{}, name});
    set.sheets.push_back(Sheet{name, std::move(grid)});
  }
  if (set.sheets.empty()) fail(ErrorCode::CorruptWorkbook, "workbook has no sheets");
  return set;
}

}  // namespace

SheetSet parse_xlsx(std::string_view bytes) {
  try {
    return parse_workbook(bytes);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(ErrorCode::CorruptWorkbook, std::string("malformed workbook: ") + e.what());
  }
}

}  // namespace straptor::ingest
