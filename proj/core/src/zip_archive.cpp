#include "partproto/zip_archive.hpp"

#include <zlib.h>

#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>

#include "partproto/errors.hpp"

namespace partproto::zip {

namespace {

constexpr std::uint32_t kLocalHeaderSig = 0x04034b50;
constexpr std::uint32_t kCentralHeaderSig = 0x02014b50;
constexpr std::uint32_t kEndOfCentralSig = 0x06054b50;
constexpr std::uint16_t kVersion = 20;
constexpr std::uint16_t kDosTime = 0;
constexpr std::uint16_t kDosDate = (1 << 5) | 1;  // 1980-01-01
constexpr std::uint32_t kZip64Marker = 0xFFFFFFFF;
constexpr std::uint16_t kStored = 0;
constexpr std::uint16_t kDeflated = 8;
constexpr std::uint16_t kZip64ExtraId = 0x0001;

void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

void put32(std::string& out, std::uint32_t v) {
  put16(out, static_cast<std::uint16_t>(v & 0xFFFF));
  put16(out, static_cast<std::uint16_t>(v >> 16));
}

[[noreturn]] void malformed(const std::string& why) {
  throw Error(ErrorKind::kMalformedArchive, "zip: " + why);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint16_t u16(std::size_t at) const {
    need(at, 2);
    return static_cast<std::uint16_t>(byte(at) | (byte(at + 1) << 8));
  }
  std::uint32_t u32(std::size_t at) const {
    return static_cast<std::uint32_t>(u16(at)) | (static_cast<std::uint32_t>(u16(at + 2)) << 16);
  }
  std::uint64_t u64(std::size_t at) const {
    return static_cast<std::uint64_t>(u32(at)) | (static_cast<std::uint64_t>(u32(at + 4)) << 32);
  }
  std::string_view slice(std::size_t at, std::size_t len) const {
    need(at, len);
    return bytes_.substr(at, len);
  }
  std::size_t size() const { return bytes_.size(); }

 private:
  unsigned byte(std::size_t at) const { return static_cast<unsigned char>(bytes_[at]); }
  void need(std::size_t at, std::size_t len) const {
    if (at > bytes_.size() || len > bytes_.size() - at) malformed("truncated file");
  }
  std::string_view bytes_;
};

std::uint32_t crc_of(std::string_view data) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t offset = 0;
  while (offset < data.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(data.size() - offset, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data.data() + offset), chunk);
    offset += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

void write(const std::filesystem::path& path, const std::vector<Entry>& entries) {
  std::string body;
  std::string central;
  for (const Entry& entry : entries) {
    if (entry.data.size() >= kZip64Marker || body.size() >= kZip64Marker) {
      throw Error(ErrorKind::kIoError, "zip: entries above 4 GiB are not supported");
    }
    const auto offset = static_cast<std::uint32_t>(body.size());
    const std::uint32_t crc = crc_of(entry.data);
    const auto size = static_cast<std::uint32_t>(entry.data.size());
    const auto name_len = static_cast<std::uint16_t>(entry.name.size());

    put32(body, kLocalHeaderSig);
    put16(body, kVersion);
    put16(body, 0);  // flags
    put16(body, 0);  // stored
    put16(body, kDosTime);
    put16(body, kDosDate);
    put32(body, crc);
    put32(body, size);
    put32(body, size);
    put16(body, name_len);
    put16(body, 0);
    body += entry.name;
    body += entry.data;

    put32(central, kCentralHeaderSig);
    put16(central, kVersion);
    put16(central, kVersion);
    put16(central, 0);
    put16(central, 0);
    put16(central, kDosTime);
    put16(central, kDosDate);
    put32(central, crc);
    put32(central, size);
    put32(central, size);
    put16(central, name_len);
    put16(central, 0);  // extra
    put16(central, 0);  // comment
    put16(central, 0);  // disk
    put16(central, 0);  // internal attrs
    put32(central, 0);  // external attrs
    put32(central, offset);
    central += entry.name;
  }
  const auto central_offset = static_cast<std::uint32_t>(body.size());
  const auto count = static_cast<std::uint16_t>(entries.size());
  std::string end;
  put32(end, kEndOfCentralSig);
  put16(end, 0);
  put16(end, 0);
  put16(end, count);
  put16(end, count);
  put32(end, static_cast<std::uint32_t>(central.size()));
  put32(end, central_offset);
  put16(end, 0);

  std::filesystem::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIoError, "cannot open " + tmp.string() + " for writing");
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    out.write(central.data(), static_cast<std::streamsize>(central.size()));
    out.write(end.data(), static_cast<std::streamsize>(end.size()));
    if (!out) throw Error(ErrorKind::kIoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::kIoError, "cannot rename into " + path.string() + ": " + ec.message());
}

namespace {

// Raw deflate stream (no zlib header) of an entry written by a compressing
// writer such as numpy's savez_compressed.
std::string inflate_raw(std::string_view packed, std::uint64_t size, const std::string& name) {
  std::string out(size, '\0');
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) malformed("cannot initialise inflate");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(packed.data()));
  zs.avail_in = static_cast<uInt>(packed.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int status = inflate(&zs, Z_FINISH);
  const bool complete = status == Z_STREAM_END && zs.total_out == size;
  inflateEnd(&zs);
  if (!complete) malformed("entry '" + name + "' does not inflate to its recorded size");
  return out;
}

}  // namespace

std::vector<Entry> read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorKind::kIoError, "read failed for " + path.string());

  const Reader r(bytes);
  constexpr std::size_t kEndSize = 22;
  if (bytes.size() < kEndSize) malformed("file too short");
  // The end record sits at the tail, possibly followed by a comment.
  std::size_t end_at = bytes.size() - kEndSize;
  while (r.u32(end_at) != kEndOfCentralSig) {
    if (end_at == 0 || bytes.size() - end_at > kEndSize + 0xFFFF) {
      malformed("end of central directory not found");
    }
    --end_at;
  }
  const std::size_t count = r.u16(end_at + 10);
  std::size_t at = r.u32(end_at + 16);

  std::vector<Entry> entries;
  entries.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (r.u32(at) != kCentralHeaderSig) malformed("bad central directory header");
    const std::uint16_t method = r.u16(at + 10);
    const std::uint32_t crc = r.u32(at + 16);
    std::uint64_t compressed = r.u32(at + 20);
    std::uint64_t size = r.u32(at + 24);
    const std::uint16_t name_len = r.u16(at + 28);
    const std::uint16_t extra_len = r.u16(at + 30);
    const std::uint16_t comment_len = r.u16(at + 32);
    std::uint64_t local = r.u32(at + 42);
    std::string name(r.slice(at + 46, name_len));

    // Zip64 extra field carries whichever of the three values overflowed.
    std::size_t extra = at + 46 + name_len;
    const std::size_t extra_end = extra + extra_len;
    while (extra + 4 <= extra_end) {
      const std::uint16_t id = r.u16(extra);
      const std::uint16_t len = r.u16(extra + 2);
      if (id == kZip64ExtraId) {
        std::size_t field = extra + 4;
        if (size == kZip64Marker) { size = r.u64(field); field += 8; }
        if (compressed == kZip64Marker) { compressed = r.u64(field); field += 8; }
        if (local == kZip64Marker) { local = r.u64(field); }
      }
      extra += 4 + len;
    }
    if (method != kStored && method != kDeflated) {
      malformed("entry '" + name + "' uses unsupported compression method " + std::to_string(method));
    }
    if (method == kStored && compressed != size) malformed("entry '" + name + "' has inconsistent sizes");

    if (r.u32(local) != kLocalHeaderSig) malformed("bad local header for '" + name + "'");
    const std::size_t data_at = local + 30 + r.u16(local + 26) + r.u16(local + 28);
    std::string data = method == kStored ? std::string(r.slice(data_at, size))
                                         : inflate_raw(r.slice(data_at, compressed), size, name);
    if (crc_of(data) != crc) malformed("CRC mismatch in '" + name + "'");
    entries.push_back({std::move(name), std::move(data)});
    at += 46 + name_len + extra_len + comment_len;
  }
  return entries;
}

}  // namespace partproto::zip
