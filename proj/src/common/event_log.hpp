#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace straptor {

// Structured stage-boundary log: one JSON object per line, each with a
// monotonically increasing `seq` that doubles as the polling cursor.
class EventLog {
 public:
  EventLog() = default;
  // Appends to `file` (created if missing); seq continues after existing lines.
  explicit EventLog(const std::filesystem::path& file);

  void set_echo(std::ostream* echo) { echo_ = echo; }

  void emit(std::string_view stage, std::string_view event, nlohmann::json detail = nlohmann::json::object());

  // Entries with seq > cursor, oldest first, at most `limit`.
  std::vector<nlohmann::json> since(std::uint64_t cursor, std::size_t limit = 500) const;
  std::uint64_t last_seq() const;

 private:
  static constexpr std::size_t kRetained = 10000;

  mutable std::mutex mu_;
  std::ofstream out_;
  std::ostream* echo_ = nullptr;
  std::deque<nlohmann::json> recent_;
  std::uint64_t seq_ = 0;
};

}  // namespace straptor
