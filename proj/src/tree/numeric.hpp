#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace straptor::tree {

// Formatted-number parsing shared by Aggregate, Compare, field tagging and
// answer normalization: thousands separators and currency symbols are
// stripped, a trailing '%' divides by 100.
std::optional<double> parse_number(std::string_view raw);

// How a column's cells present numbers, so computed results can be shown the
// same way ("70%", "$1,200" -> "$1200").
struct NumberStyle {
  bool percent = false;
  std::string currency;  // prefix symbol, empty when none

  std::string render(double value) const;
  bool operator==(const NumberStyle&) const = default;
};

NumberStyle number_style_of(std::string_view raw);

}  // namespace straptor::tree
