#include <string>
#include <vector>

#include "common/error.hpp"
#include "common/text.hpp"
#include "ingest/ingest.hpp"

namespace straptor::ingest {

namespace {

using Record = std::vector<std::string>;

std::vector<Record> split_records(std::string_view s) {
  std::vector<Record> records;
  Record current;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;

  auto end_field = [&] {
    current.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(current));
    current.clear();
  };

  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < s.size() && s[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r') {
      if (i + 1 < s.size() && s[i + 1] == '\n') ++i;
      end_record();
    } else if (c == '\n') {
      end_record();
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (field_started || !field.empty() || !current.empty()) end_record();
  return records;
}

bool blank(const Record& r) {
  for (const auto& f : r)
    if (!text::trim(f).empty()) return false;
  return true;
}

}  // namespace

CellGrid parse_csv(std::string_view bytes) {
  if (!text::is_valid_utf8(bytes)) fail(ErrorCode::InvalidEncoding, "CSV input is not valid UTF-8");
  auto records = split_records(text::strip_bom(bytes));
  while (!records.empty() && blank(records.back())) records.pop_back();
  if (records.empty()) fail(ErrorCode::EmptyInput, "CSV input has no non-blank lines");

  std::size_t cols = 0;
  for (const auto& r : records) cols = std::max(cols, r.size());

  CellGrid grid(records.size(), cols);
  for (std::size_t r = 0; r < records.size(); ++r)
    for (std::size_t c = 0; c < records[r].size(); ++c)
      if (!records[r][c].empty()) grid.add_text(r, c, std::move(records[r][c]));
  return grid;
}

}  // namespace straptor::ingest
