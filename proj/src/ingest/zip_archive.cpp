#include "ingest/zip_archive.hpp"

#include <cstring>

#include <zlib.h>

#include "common/error.hpp"

namespace straptor::ingest {

namespace {

constexpr std::uint32_t kEndOfCentralDir = 0x06054b50;
constexpr std::uint32_t kCentralHeader = 0x02014b50;
constexpr std::uint32_t kLocalHeader = 0x04034b50;

std::uint16_t u16(std::string_view b, std::size_t at) {
  if (at + 2 > b.size()) fail(ErrorCode::CorruptWorkbook, "workbook archive is truncated");
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                    (static_cast<unsigned char>(b[at + 1]) << 8));
}

std::uint32_t u32(std::string_view b, std::size_t at) {
  return static_cast<std::uint32_t>(u16(b, at)) | (static_cast<std::uint32_t>(u16(b, at + 2)) << 16);
}

}  // namespace

ZipArchive::ZipArchive(std::string_view bytes) : bytes_(bytes) {
  static const unsigned char kOle[] = {0xD0, 0xCF, 0x11, 0xE0};
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kOle, 4) == 0)
    fail(ErrorCode::UnsupportedFeature, "encrypted or legacy binary workbooks are not supported");
  if (bytes.size() < 22) fail(ErrorCode::CorruptWorkbook, "workbook archive is truncated");

  std::size_t eocd = std::string_view::npos;
  const std::size_t lowest = bytes.size() > 22 + 65535 ? bytes.size() - 22 - 65535 : 0;
  for (std::size_t i = bytes.size() - 22 + 1; i-- > lowest;) {
    if (u32(bytes, i) == kEndOfCentralDir) {
      eocd = i;
      break;
    }
  }
  if (eocd == std::string_view::npos) fail(ErrorCode::CorruptWorkbook, "no ZIP end-of-central-directory record");

  const std::uint16_t count = u16(bytes, eocd + 10);
  const std::uint32_t dir_offset = u32(bytes, eocd + 16);
  if (count == 0xFFFF || dir_offset == 0xFFFFFFFF)
    fail(ErrorCode::UnsupportedFeature, "zip64 workbooks are not supported");

  std::size_t p = dir_offset;
  for (std::uint16_t k = 0; k < count; ++k) {
    if (u32(bytes, p) != kCentralHeader) fail(ErrorCode::CorruptWorkbook, "bad ZIP central directory entry");
    Entry e;
    e.flags = u16(bytes, p + 8);
    e.method = u16(bytes, p + 10);
    e.crc = u32(bytes, p + 16);
    e.compressed_size = u32(bytes, p + 20);
    e.uncompressed_size = u32(bytes, p + 24);
    const std::uint16_t name_len = u16(bytes, p + 28);
    const std::uint16_t extra_len = u16(bytes, p + 30);
    const std::uint16_t comment_len = u16(bytes, p + 32);
    e.local_offset = u32(bytes, p + 42);
    if (p + 46 + name_len > bytes.size()) fail(ErrorCode::CorruptWorkbook, "workbook archive is truncated");
    entries_.emplace(std::string(bytes.substr(p + 46, name_len)), e);
    p += 46 + name_len + extra_len + comment_len;
  }
}

std::optional<std::string> ZipArchive::read(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) return std::nullopt;
  const Entry& e = it->second;
  if (e.flags & 0x1) fail(ErrorCode::UnsupportedFeature, "encrypted workbook entries are not supported");
  if (e.compressed_size == 0xFFFFFFFF) fail(ErrorCode::UnsupportedFeature, "zip64 workbooks are not supported");

  const std::size_t lh = e.local_offset;
  if (u32(bytes_, lh) != kLocalHeader) fail(ErrorCode::CorruptWorkbook, "bad ZIP local header for " + name);
  const std::size_t data = lh + 30 + u16(bytes_, lh + 26) + u16(bytes_, lh + 28);
  if (data + e.compressed_size > bytes_.size()) fail(ErrorCode::CorruptWorkbook, "workbook archive is truncated");
  const auto payload = bytes_.substr(data, e.compressed_size);

  std::string out;
  if (e.method == 0) {
    out.assign(payload);
  } else if (e.method == 8) {
    out.resize(e.uncompressed_size);
    z_stream zs{};
    if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) fail(ErrorCode::Internal, "zlib initialisation failed");
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(payload.data()));
    zs.avail_in = static_cast<uInt>(payload.size());
    zs.next_out = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = inflate(&zs, Z_FINISH);
    const auto produced = zs.total_out;
    inflateEnd(&zs);
    if (rc != Z_STREAM_END || produced != e.uncompressed_size)
      fail(ErrorCode::CorruptWorkbook, "cannot inflate " + name);
  } else {
    fail(ErrorCode::UnsupportedFeature, "unsupported ZIP compression method " + std::to_string(e.method));
  }
  const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(out.data()), static_cast<uInt>(out.size()));
  if (crc != e.crc) fail(ErrorCode::CorruptWorkbook, "CRC mismatch in " + name);
  return out;
}

}  // namespace straptor::ingest
