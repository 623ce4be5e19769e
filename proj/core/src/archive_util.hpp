#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "partproto/errors.hpp"
#include "partproto/npy.hpp"
#include "partproto/zip_archive.hpp"

namespace partproto::detail {

inline constexpr const char* kManifestName = "manifest.json";

/// Entry payloads keyed by name with any ".npy" suffix stripped.
class ArchiveContents {
 public:
  explicit ArchiveContents(const std::filesystem::path& path) : path_(path) {
    for (auto& entry : zip::read(path)) {
      std::string name = entry.name;
      if (name.size() > 4 && name.ends_with(".npy")) name.resize(name.size() - 4);
      entries_[name] = std::move(entry.data);
    }
    const auto it = entries_.find(kManifestName);
    if (it == entries_.end()) fail("missing manifest.json");
    try {
      manifest_ = nlohmann::json::parse(it->second);
    } catch (const nlohmann::json::exception& e) {
      fail(std::string("manifest.json is not valid JSON: ") + e.what());
    }
    if (!manifest_.is_object()) fail("manifest.json is not an object");
    if (manifest_.value("format_version", -1) != 1) fail("unsupported or missing format_version");
  }

  const nlohmann::json& manifest() const { return manifest_; }
  bool has(const std::string& name) const { return entries_.count(name) != 0; }

  npy::Array array(const std::string& name) const {
    const auto it = entries_.find(name);
    if (it == entries_.end()) fail("missing entry '" + name + "'");
    try {
      return npy::decode(it->second);
    } catch (const Error& e) {
      fail("entry '" + name + "': " + e.what());
    }
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw Error(ErrorKind::kMalformedArchive, path_.string() + ": " + why);
  }

 private:
  std::filesystem::path path_;
  std::map<std::string, std::string> entries_;
  nlohmann::json manifest_;
};

/// Serializes named arrays followed by the manifest; entry order is the
/// order given, which keeps output bytes reproducible.
inline void write_archive(const std::filesystem::path& path,
                          const std::vector<std::pair<std::string, npy::Array>>& arrays,
                          nlohmann::json manifest) {
  std::vector<zip::Entry> entries;
  entries.reserve(arrays.size() + 1);
  nlohmann::json names = nlohmann::json::array();
  for (const auto& [name, array] : arrays) {
    entries.push_back({name + ".npy", npy::encode(array)});
    names.push_back(name);
  }
  manifest["format_version"] = 1;
  manifest["entries"] = names;
  entries.push_back({kManifestName, manifest.dump(2) + "\n"});
  zip::write(path, entries);
}

}  // namespace partproto::detail
