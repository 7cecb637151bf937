#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace straptor::ingest {

// Read-only view over an in-memory ZIP archive (stored and deflate entries).
// Structural problems raise CorruptWorkbook; encryption and zip64 raise
// UnsupportedFeature.
class ZipArchive {
 public:
  explicit ZipArchive(std::string_view bytes);

  bool contains(const std::string& name) const { return entries_.count(name) > 0; }
  std::optional<std::string> read(const std::string& name) const;

 private:
  struct Entry {
    std::uint16_t flags = 0;
    std::uint16_t method = 0;
    std::uint32_t crc = 0;
    std::uint32_t compressed_size = 0;
    std::uint32_t uncompressed_size = 0;
    std::uint32_t local_offset = 0;
  };

  std::string_view bytes_;
  std::map<std::string, Entry> entries_;
};

}  // namespace straptor::ingest
