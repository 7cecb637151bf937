#include "tree/numeric.hpp"

#include <array>
#include <charconv>
#include <cmath>

#include "common/text.hpp"

namespace straptor::tree {

namespace {

constexpr std::array<std::string_view, 6> kCurrency = {"$", "€", "£", "¥", "₹", "USD"};

bool strip_currency(std::string_view& s, std::string* found = nullptr) {
  for (auto sym : kCurrency) {
    if (s.starts_with(sym)) {
      s.remove_prefix(sym.size());
      if (found) *found = std::string(sym);
      return true;
    }
    if (s.ends_with(sym)) {
      s.remove_suffix(sym.size());
      if (found) *found = std::string(sym);
      return true;
    }
  }
  return false;
}

// "1,234,567.8" -> "1234567.8"; rejects misplaced separators such as "1,2".
std::optional<std::string> strip_thousands(std::string_view s) {
  if (s.find(',') == std::string_view::npos) return std::string(s);
  const auto dot = s.find('.');
  const auto int_part = s.substr(0, dot);
  const auto groups = text::split(int_part, ',');
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto& g = groups[i];
    if (i == 0 ? (g.empty() || g.size() > 3) : g.size() != 3) {
      if (!(i == 0 && (g == "-" || g == "+"))) return std::nullopt;
    }
  }
  std::string out;
  for (char c : int_part)
    if (c != ',') out.push_back(c);
  if (dot != std::string_view::npos) {
    if (s.substr(dot).find(',') != std::string_view::npos) return std::nullopt;
    out.append(s.substr(dot));
  }
  return out;
}

}  // namespace

std::optional<double> parse_number(std::string_view raw) {
  auto s = text::trim(raw);
  if (s.empty()) return std::nullopt;
  bool negative = false;
  if (s.front() == '-' || s.front() == '+') {
    negative = s.front() == '-';
    s.remove_prefix(1);
    s = text::trim(s);
  }
  strip_currency(s);
  s = text::trim(s);
  bool percent = false;
  if (!s.empty() && s.back() == '%') {
    percent = true;
    s.remove_suffix(1);
    s = text::trim(s);
  }
  if (s.empty()) return std::nullopt;
  if (s.front() == '-' || s.front() == '+') {  // "$-5"
    if (negative) return std::nullopt;
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  auto digits = strip_thousands(s);
  if (!digits || digits->empty()) return std::nullopt;
  for (char c : *digits)
    if (!(std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == 'e' || c == 'E' || c == '-' || c == '+'))
      return std::nullopt;
  if (!std::isdigit(static_cast<unsigned char>(digits->front())) && digits->front() != '.') return std::nullopt;
  double v = 0;
  const auto* begin = digits->data();
  const auto* end = begin + digits->size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end || !std::isfinite(v)) return std::nullopt;
  if (percent) v /= 100.0;
  return negative ? -v : v;
}

NumberStyle number_style_of(std::string_view raw) {
  NumberStyle style;
  auto s = text::trim(raw);
  if (!parse_number(s)) return style;
  style.percent = !s.empty() && s.back() == '%';
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) s.remove_prefix(1);
  strip_currency(s, &style.currency);
  return style;
}

std::string NumberStyle::render(double value) const {
  if (percent) return text::display_number(value * 100.0) + "%";
  if (!currency.empty()) {
    const bool neg = value < 0;
    return (neg ? "-" : "") + currency + text::display_number(std::fabs(value));
  }
  return text::display_number(value);
}

}  // namespace straptor::tree
