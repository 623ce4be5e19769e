#include "partproto/episode_archive.hpp"

#include <functional>
#include <string>

#include "archive_util.hpp"

namespace partproto {

namespace {

using detail::ArchiveContents;

std::string support_name(const char* what, std::size_t c, std::size_t k) {
  return std::string("support_") + what + "_" + std::to_string(c) + "_" + std::to_string(k);
}

npy::Array grid_array(const FeatureGrid& grid) {
  return npy::from_floats({grid.height(), grid.width(), grid.channels()}, grid.values());
}

npy::Array mask_array(const LabelGrid& mask) {
  return npy::from_u8({mask.height(), mask.width()}, mask.labels());
}

FeatureGrid grid_from(const ArchiveContents& archive, const std::string& name) {
  const npy::Array array = archive.array(name);
  if (array.dtype != npy::DType::kFloat32 || array.shape.size() != 3) {
    archive.fail("entry '" + name + "' must be a 3-d float32 array");
  }
  try {
    return FeatureGrid(array.shape[0], array.shape[1], array.shape[2], npy::to_floats(array));
  } catch (const Error& e) {
    archive.fail("entry '" + name + "': " + e.what());
  }
}

LabelGrid mask_from(const ArchiveContents& archive, const std::string& name) {
  const npy::Array array = archive.array(name);
  if (array.dtype != npy::DType::kUInt8 || array.shape.size() != 2) {
    archive.fail("entry '" + name + "' must be a 2-d uint8 array");
  }
  try {
    return LabelGrid(array.shape[0], array.shape[1], npy::to_u8(array));
  } catch (const Error& e) {
    archive.fail("entry '" + name + "': " + e.what());
  }
}

// Counts come from the manifest when present, otherwise from the entries.
std::size_t count_field(const ArchiveContents& archive, const char* field,
                        const std::function<std::string(std::size_t)>& name_of) {
  const auto& manifest = archive.manifest();
  if (manifest.contains(field)) {
    if (!manifest[field].is_number_unsigned()) archive.fail(std::string(field) + " is not a count");
    return manifest[field].get<std::size_t>();
  }
  std::size_t n = 0;
  while (archive.has(name_of(n))) ++n;
  return n;
}

}  // namespace

void write_episode_archive(const Episode& episode, const std::filesystem::path& path) {
  validate(episode);
  std::vector<std::pair<std::string, npy::Array>> arrays;
  for (std::size_t c = 0; c < episode.support.size(); ++c) {
    for (std::size_t k = 0; k < episode.support[c].size(); ++k) {
      arrays.emplace_back(support_name("feat", c, k), grid_array(episode.support[c][k].features));
      arrays.emplace_back(support_name("mask", c, k), mask_array(episode.support[c][k].mask));
    }
  }
  for (std::size_t i = 0; i < episode.unlabeled.size(); ++i) {
    arrays.emplace_back("unlabeled_feat_" + std::to_string(i), grid_array(episode.unlabeled[i]));
  }
  for (std::size_t j = 0; j < episode.queries.size(); ++j) {
    arrays.emplace_back("query_feat_" + std::to_string(j), grid_array(episode.queries[j].features));
    arrays.emplace_back("query_mask_" + std::to_string(j), mask_array(episode.queries[j].mask));
  }
  arrays.emplace_back("class_list",
                      npy::from_i32({episode.class_list.size()}, episode.class_list));

  nlohmann::json manifest;
  manifest["kind"] = "episode";
  manifest["n_way"] = episode.n_way();
  manifest["k_shot"] = episode.k_shot();
  manifest["n_unlabeled"] = episode.unlabeled.size();
  manifest["n_query"] = episode.queries.size();
  manifest["image_size"] = {episode.image_height, episode.image_width};
  detail::write_archive(path, arrays, std::move(manifest));
}

Episode read_episode_archive(const std::filesystem::path& path) {
  const ArchiveContents archive(path);
  const auto& manifest = archive.manifest();

  Episode episode;
  const npy::Array classes = archive.array("class_list");
  if (classes.shape.size() != 1) archive.fail("class_list must be 1-d");
  if (classes.dtype == npy::DType::kInt32) {
    episode.class_list = npy::to_i32(classes);
  } else if (classes.dtype == npy::DType::kUInt8) {
    for (std::uint8_t id : npy::to_u8(classes)) episode.class_list.push_back(id);
  } else {
    archive.fail("class_list must be int32 or uint8");
  }

  if (manifest.contains("image_size")) {
    const auto& size = manifest["image_size"];
    if (!size.is_array() || size.size() != 2 || !size[0].is_number_unsigned() ||
        !size[1].is_number_unsigned()) {
      archive.fail("image_size must be [height, width]");
    }
    episode.image_height = size[0].get<std::size_t>();
    episode.image_width = size[1].get<std::size_t>();
  } else if (archive.has("image_size")) {
    const auto size = npy::to_i32(archive.array("image_size"));
    if (size.size() != 2 || size[0] <= 0 || size[1] <= 0) archive.fail("bad image_size array");
    episode.image_height = static_cast<std::size_t>(size[0]);
    episode.image_width = static_cast<std::size_t>(size[1]);
  } else {
    archive.fail("missing image_size");
  }

  const std::size_t n_way = episode.class_list.size();
  const std::size_t k_shot =
      count_field(archive, "k_shot", [](std::size_t k) { return support_name("feat", 0, k); });
  const std::size_t n_unlabeled = count_field(
      archive, "n_unlabeled", [](std::size_t i) { return "unlabeled_feat_" + std::to_string(i); });
  const std::size_t n_query = count_field(
      archive, "n_query", [](std::size_t j) { return "query_feat_" + std::to_string(j); });
  if (manifest.contains("n_way") && manifest["n_way"] != n_way) {
    archive.fail("manifest n_way disagrees with class_list");
  }

  episode.support.resize(n_way);
  for (std::size_t c = 0; c < n_way; ++c) {
    for (std::size_t k = 0; k < k_shot; ++k) {
      episode.support[c].push_back({grid_from(archive, support_name("feat", c, k)),
                                    mask_from(archive, support_name("mask", c, k))});
    }
  }
  for (std::size_t i = 0; i < n_unlabeled; ++i) {
    episode.unlabeled.push_back(grid_from(archive, "unlabeled_feat_" + std::to_string(i)));
  }
  for (std::size_t j = 0; j < n_query; ++j) {
    episode.queries.push_back({grid_from(archive, "query_feat_" + std::to_string(j)),
                               mask_from(archive, "query_mask_" + std::to_string(j))});
  }
  validate(episode);
  return episode;
}

void write_mask_archive(const LabelGrid& mask, const std::filesystem::path& path) {
  nlohmann::json manifest;
  manifest["kind"] = "mask";
  detail::write_archive(path, {{"mask", mask_array(mask)}}, std::move(manifest));
}

LabelGrid read_mask_archive(const std::filesystem::path& path) {
  const ArchiveContents archive(path);
  return mask_from(archive, "mask");
}

}  // namespace partproto
