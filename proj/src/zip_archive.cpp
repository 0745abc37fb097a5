#include "auxseg/zip_archive.hpp"

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <limits>

#include "auxseg/common.hpp"

namespace auxseg {

namespace {

constexpr std::uint32_t kLocalSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEndSig = 0x06054b50;
constexpr std::uint16_t kDosDate = (0 << 9) | (1 << 5) | 1;  // 1980-01-01

void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get(std::string_view s, std::size_t pos, int bytes) {
  if (pos + bytes > s.size()) throw FormatError("truncated zip archive");
  std::uint32_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[pos + i])) << (8 * i);
  return v;
}

std::uint32_t crc_of(std::string_view data) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t pos = 0;
  while (pos < data.size()) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(data.size() - pos, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data.data() + pos), chunk);
    pos += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::string inflate_raw(std::string_view in, std::size_t expected) {
  std::string out(expected, '\0');
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw FormatError("zlib init failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(in.data()));
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || zs.total_out != expected) throw FormatError("corrupt deflated zip entry");
  return out;
}

}  // namespace

void ZipWriter::add(std::string name, std::string_view data) {
  if (data.size() > std::numeric_limits<std::uint32_t>::max()) throw Error("zip entry '" + name + "' too large");
  entries_[std::move(name)] = std::string(data);
}

std::string ZipWriter::finish() const {
  std::string out, central;
  for (const auto& [name, data] : entries_) {
    const std::uint32_t offset = static_cast<std::uint32_t>(out.size());
    const std::uint32_t crc = crc_of(data);
    const auto size = static_cast<std::uint32_t>(data.size());
    put32(out, kLocalSig);
    put16(out, 20);
    put16(out, 0);
    put16(out, 0);  // stored
    put16(out, 0);
    put16(out, kDosDate);
    put32(out, crc);
    put32(out, size);
    put32(out, size);
    put16(out, static_cast<std::uint16_t>(name.size()));
    put16(out, 0);
    out += name;
    out += data;

    put32(central, kCentralSig);
    put16(central, 20);
    put16(central, 20);
    put16(central, 0);
    put16(central, 0);
    put16(central, 0);
    put16(central, kDosDate);
    put32(central, crc);
    put32(central, size);
    put32(central, size);
    put16(central, static_cast<std::uint16_t>(name.size()));
    put16(central, 0);
    put16(central, 0);
    put16(central, 0);
    put16(central, 0);
    put32(central, 0);
    put32(central, offset);
    central += name;
  }
  if (out.size() > std::numeric_limits<std::uint32_t>::max()) throw Error("zip archive exceeds 4 GiB");
  const auto cd_offset = static_cast<std::uint32_t>(out.size());
  out += central;
  put32(out, kEndSig);
  put16(out, 0);
  put16(out, 0);
  put16(out, static_cast<std::uint16_t>(entries_.size()));
  put16(out, static_cast<std::uint16_t>(entries_.size()));
  put32(out, static_cast<std::uint32_t>(central.size()));
  put32(out, cd_offset);
  put16(out, 0);
  return out;
}

std::map<std::string, std::string> read_zip(std::string_view archive) {
  if (archive.size() < 22) throw FormatError("not a zip archive");
  std::size_t end = std::string_view::npos;
  const std::size_t lowest = archive.size() > 22 + 65535 ? archive.size() - 22 - 65535 : 0;
  for (std::size_t pos = archive.size() - 22 + 1; pos-- > lowest;) {
    if (get(archive, pos, 4) == kEndSig) {
      end = pos;
      break;
    }
  }
  if (end == std::string_view::npos) throw FormatError("zip end-of-directory record not found");
  const std::uint32_t count = get(archive, end + 10, 2);
  std::size_t pos = get(archive, end + 16, 4);

  std::map<std::string, std::string> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    if (get(archive, pos, 4) != kCentralSig) throw FormatError("corrupt zip central directory");
    const std::uint32_t method = get(archive, pos + 10, 2);
    const std::uint32_t crc = get(archive, pos + 16, 4);
    const std::uint32_t csize = get(archive, pos + 20, 4);
    const std::uint32_t usize = get(archive, pos + 24, 4);
    const std::uint32_t name_len = get(archive, pos + 28, 2);
    const std::uint32_t extra_len = get(archive, pos + 30, 2);
    const std::uint32_t comment_len = get(archive, pos + 32, 2);
    const std::uint32_t local = get(archive, pos + 42, 4);
    if (pos + 46 + name_len > archive.size()) throw FormatError("truncated zip archive");
    std::string name(archive.substr(pos + 46, name_len));
    pos += 46 + name_len + extra_len + comment_len;

    if (get(archive, local, 4) != kLocalSig) throw FormatError("corrupt zip local header for '" + name + "'");
    const std::size_t data_pos = local + 30 + get(archive, local + 26, 2) + get(archive, local + 28, 2);
    if (data_pos + csize > archive.size()) throw FormatError("truncated zip entry '" + name + "'");
    const std::string_view raw = archive.substr(data_pos, csize);
    std::string data;
    if (method == 0) {
      data = std::string(raw);
    } else if (method == 8) {
      data = inflate_raw(raw, usize);
    } else {
      throw FormatError("unsupported zip compression method " + std::to_string(method));
    }
    if (data.size() != usize || crc_of(data) != crc) throw FormatError("zip entry '" + name + "' fails CRC check");
    entries.emplace(std::move(name), std::move(data));
  }
  return entries;
}

}  // namespace auxseg
