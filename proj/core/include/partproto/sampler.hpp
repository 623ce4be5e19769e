#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "partproto/episode.hpp"

namespace partproto {

/// A labeled grid whose mask holds class identifiers (not episode-local
/// labels).
struct PoolImage {
  FeatureGrid features;
  LabelGrid mask;
  std::set<std::int32_t> classes;
  std::string origin;
};

/// Every labeled image (supports and queries) of a set of episodes, with
/// masks translated to class identifiers. Unlabeled grids are dropped
/// because their classes are unknown.
struct ImagePool {
  std::vector<PoolImage> images;

  static ImagePool from_episodes(std::span<const Episode> episodes);
  static ImagePool from_directory(const std::filesystem::path& dir);

  std::vector<std::int32_t> classes() const;
};

/// Sorted `*.npz` files of a directory. Throws IoError when the directory
/// cannot be read and MalformedArchive when it holds no archive.
std::vector<std::filesystem::path> list_episode_archives(const std::filesystem::path& dir);

struct EpisodeShape {
  std::size_t n_way = 1;
  std::size_t k_shot = 1;
  std::size_t n_unlabeled = 6;
  std::size_t n_query = 1;
};

/// Draws a fresh episode from the pool restricted to `fold_classes` (all
/// pool classes when empty). Support, query and unlabeled images are
/// pairwise disjoint; support masks mark only their designated class. Each
/// class contributes k_shot supports and n_query queries.
/// Throws InsufficientData.
Episode sample_episode(const ImagePool& pool, const std::vector<std::int32_t>& fold_classes,
                       const EpisodeShape& shape, std::uint64_t seed);

}  // namespace partproto
