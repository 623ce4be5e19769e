#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace partproto::zip {

struct Entry {
  std::string name;
  std::string data;
};

/// Writes an uncompressed (stored) ZIP file. Timestamps are fixed so that
/// identical entries produce identical bytes. The file is written next to
/// its destination and renamed into place.
void write(const std::filesystem::path& path, const std::vector<Entry>& entries);

/// Reads every entry of a ZIP file. Stored and deflated entries are
/// accepted; other methods, CRC mismatches and truncation raise
/// MalformedArchive. An unreadable file raises IoError.
std::vector<Entry> read(const std::filesystem::path& path);

}  // namespace partproto::zip
