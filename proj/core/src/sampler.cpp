#include "partproto/sampler.hpp"

#include <algorithm>
#include <map>

#include "partproto/episode_archive.hpp"
#include "partproto/errors.hpp"
#include "partproto/rng.hpp"

namespace partproto {

namespace {

[[noreturn]] void insufficient(const std::string& why) {
  throw Error(ErrorKind::kInsufficientData, "cannot sample episode: " + why);
}

void add_image(ImagePool& pool, const LabeledGrid& grid, const Episode& episode, std::string origin) {
  LabelGrid ids = to_class_ids(grid.mask, episode.class_list);
  std::set<std::int32_t> classes;
  for (std::uint8_t l : ids.labels()) {
    if (l != 0 && l != kIgnoreLabel) classes.insert(l);
  }
  pool.images.push_back({grid.features, std::move(ids), std::move(classes), std::move(origin)});
}

// First `count` entries of a seeded Fisher-Yates shuffle.
template <typename T>
std::vector<T> draw(std::vector<T> items, std::size_t count, Rng& rng) {
  count = std::min(count, items.size());
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.index(items.size() - i);
    std::swap(items[i], items[j]);
  }
  items.resize(count);
  return items;
}

}  // namespace

ImagePool ImagePool::from_episodes(std::span<const Episode> episodes) {
  ImagePool pool;
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    const Episode& ep = episodes[e];
    const std::string tag = "episode " + std::to_string(e);
    for (std::size_t c = 0; c < ep.support.size(); ++c) {
      for (std::size_t k = 0; k < ep.support[c].size(); ++k) {
        add_image(pool, ep.support[c][k], ep,
                  tag + " support " + std::to_string(c) + "/" + std::to_string(k));
      }
    }
    for (std::size_t j = 0; j < ep.queries.size(); ++j) {
      add_image(pool, ep.queries[j], ep, tag + " query " + std::to_string(j));
    }
  }
  return pool;
}

ImagePool ImagePool::from_directory(const std::filesystem::path& dir) {
  std::vector<Episode> episodes;
  for (const auto& path : list_episode_archives(dir)) episodes.push_back(read_episode_archive(path));
  return from_episodes(episodes);
}

std::vector<std::int32_t> ImagePool::classes() const {
  std::set<std::int32_t> all;
  for (const auto& image : images) all.insert(image.classes.begin(), image.classes.end());
  return {all.begin(), all.end()};
}

std::vector<std::filesystem::path> list_episode_archives(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw Error(ErrorKind::kIoError, "not a readable directory: " + dir.string());
  }
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".npz") out.push_back(entry.path());
  }
  if (ec) throw Error(ErrorKind::kIoError, "cannot list " + dir.string() + ": " + ec.message());
  if (out.empty()) {
    throw Error(ErrorKind::kMalformedArchive, "no episode archives (*.npz) in " + dir.string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

Episode sample_episode(const ImagePool& pool, const std::vector<std::int32_t>& fold_classes,
                       const EpisodeShape& shape, std::uint64_t seed) {
  if (shape.n_way == 0 || shape.k_shot == 0 || shape.n_query == 0) {
    throw Error(ErrorKind::kInvalidConfig, "n_way, k_shot and n_query must be positive");
  }
  const std::vector<std::int32_t> fold = fold_classes.empty() ? pool.classes() : fold_classes;
  const std::size_t per_class = shape.k_shot + shape.n_query;

  std::map<std::int32_t, std::vector<std::size_t>> holders;
  for (std::size_t i = 0; i < pool.images.size(); ++i) {
    for (std::int32_t c : pool.images[i].classes) holders[c].push_back(i);
  }
  std::vector<std::int32_t> eligible;
  for (std::int32_t c : fold) {
    if (holders.count(c) && holders[c].size() >= per_class) eligible.push_back(c);
  }
  if (eligible.size() < shape.n_way) {
    insufficient(std::to_string(shape.n_way) + "-way requested but only " +
                 std::to_string(eligible.size()) + " fold classes have " +
                 std::to_string(per_class) + " images");
  }

  Rng rng(seed);
  Episode episode;
  episode.class_list = draw(eligible, shape.n_way, rng);
  std::vector<bool> used(pool.images.size(), false);
  std::vector<std::size_t> support_ids;
  std::vector<std::size_t> query_ids;
  for (std::int32_t c : episode.class_list) {
    std::vector<std::size_t> free;
    for (std::size_t i : holders[c]) {
      if (!used[i]) free.push_back(i);
    }
    if (free.size() < per_class) insufficient("class " + std::to_string(c) + " ran out of images");
    const auto picked = draw(free, per_class, rng);
    for (std::size_t n = 0; n < picked.size(); ++n) {
      used[picked[n]] = true;
      (n < shape.k_shot ? support_ids : query_ids).push_back(picked[n]);
    }
  }

  const std::set<std::int32_t> fold_set(fold.begin(), fold.end());
  std::vector<std::size_t> spare;
  for (std::size_t i = 0; i < pool.images.size(); ++i) {
    if (used[i]) continue;
    const auto& cls = pool.images[i].classes;
    if (std::any_of(cls.begin(), cls.end(), [&](std::int32_t c) { return fold_set.count(c) > 0; })) {
      spare.push_back(i);
    }
  }
  if (spare.size() < shape.n_unlabeled) {
    insufficient(std::to_string(shape.n_unlabeled) + " unlabeled images requested, " +
                 std::to_string(spare.size()) + " available");
  }
  const auto unlabeled_ids = draw(spare, shape.n_unlabeled, rng);

  auto local_label = [&](std::uint8_t id) -> std::uint8_t {
    if (id == kIgnoreLabel) return kIgnoreLabel;
    for (std::size_t c = 0; c < episode.class_list.size(); ++c) {
      if (episode.class_list[c] == id) return static_cast<std::uint8_t>(c + 1);
    }
    return 0;
  };

  episode.support.resize(shape.n_way);
  for (std::size_t c = 0; c < shape.n_way; ++c) {
    for (std::size_t k = 0; k < shape.k_shot; ++k) {
      const PoolImage& img = pool.images[support_ids[c * shape.k_shot + k]];
      LabelGrid mask = img.mask;
      for (std::uint8_t& l : mask.labels()) {
        if (l == kIgnoreLabel) continue;
        l = l == episode.class_list[c] ? static_cast<std::uint8_t>(c + 1) : std::uint8_t{0};
      }
      episode.support[c].push_back({img.features, std::move(mask)});
    }
  }
  for (std::size_t j = 0; j < query_ids.size(); ++j) {
    const PoolImage& img = pool.images[query_ids[j]];
    LabelGrid mask = img.mask;
    for (std::uint8_t& l : mask.labels()) l = local_label(l);
    episode.queries.push_back({img.features, std::move(mask)});
  }
  for (std::size_t i : unlabeled_ids) episode.unlabeled.push_back(pool.images[i].features);

  const PoolImage& first = pool.images[support_ids.front()];
  episode.image_height = first.mask.height();
  episode.image_width = first.mask.width();
  validate(episode);
  return episode;
}

}  // namespace partproto
