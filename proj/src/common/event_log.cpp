#include "common/event_log.hpp"

#include <chrono>
#include <string>

namespace straptor {

namespace {
std::int64_t now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}
}  // namespace

EventLog::EventLog(const std::filesystem::path& file) {
  std::filesystem::create_directories(file.parent_path());
  {
    std::ifstream in(file);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto entry = nlohmann::json::parse(line, nullptr, false);
      if (entry.is_discarded()) continue;
      seq_ = std::max<std::uint64_t>(seq_, entry.value("seq", std::uint64_t{0}));
      recent_.push_back(std::move(entry));
      if (recent_.size() > kRetained) recent_.pop_front();
    }
  }
  out_.open(file, std::ios::app);
}

void EventLog::emit(std::string_view stage, std::string_view event, nlohmann::json detail) {
  std::lock_guard lock(mu_);
  nlohmann::json entry = {
      {"seq", ++seq_},
      {"ts_ms", now_ms()},
      {"stage", stage},
      {"event", event},
      {"detail", std::move(detail)},
  };
  const auto line = entry.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  if (out_.is_open()) {
    out_ << line << '\n';
    out_.flush();
  }
  if (echo_) *echo_ << line << '\n';
  recent_.push_back(std::move(entry));
  if (recent_.size() > kRetained) recent_.pop_front();
}

std::vector<nlohmann::json> EventLog::since(std::uint64_t cursor, std::size_t limit) const {
  std::lock_guard lock(mu_);
  std::vector<nlohmann::json> out;
  for (const auto& e : recent_) {
    if (e.value("seq", std::uint64_t{0}) <= cursor) continue;
    out.push_back(e);
    if (out.size() >= limit) break;
  }
  return out;
}

std::uint64_t EventLog::last_seq() const {
  std::lock_guard lock(mu_);
  return seq_;
}

}  // namespace straptor
