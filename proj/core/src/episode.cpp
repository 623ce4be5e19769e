#include "partproto/episode.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "partproto/errors.hpp"

namespace partproto {

namespace {

[[noreturn]] void invalid(const std::string& why) {
  throw Error(ErrorKind::kInvalidEpisode, "invalid episode: " + why);
}

[[noreturn]] void bad_config(const std::string& why) {
  throw Error(ErrorKind::kInvalidConfig, "invalid hyperparameters: " + why);
}

}  // namespace

std::size_t Episode::channels() const noexcept {
  if (!support.empty() && !support.front().empty()) {
    return support.front().front().features.channels();
  }
  if (!queries.empty()) return queries.front().features.channels();
  return 0;
}

void validate(const Episode& episode) {
  const std::size_t n_way = episode.class_list.size();
  if (n_way == 0) invalid("class list is empty");
  if (n_way >= kIgnoreLabel) invalid("too many classes for 8-bit masks");
  std::set<std::int32_t> seen;
  for (std::int32_t id : episode.class_list) {
    if (id < 1 || id >= kIgnoreLabel) {
      invalid("class identifier " + std::to_string(id) + " outside [1, 254]");
    }
    if (!seen.insert(id).second) invalid("duplicate class identifier " + std::to_string(id));
  }
  if (episode.support.size() != n_way) {
    invalid("support has " + std::to_string(episode.support.size()) + " ways, class list has " +
            std::to_string(n_way));
  }
  const std::size_t k_shot = episode.support.front().size();
  if (k_shot == 0) invalid("k_shot must be at least 1");
  if (episode.queries.empty()) invalid("at least one query is required");
  if (episode.image_height == 0 || episode.image_width == 0) invalid("image size must be positive");

  const std::size_t channels = episode.channels();
  auto check_grid = [&](const FeatureGrid& grid, const std::string& what) {
    if (grid.channels() != channels) {
      invalid(what + " has " + std::to_string(grid.channels()) + " channels, expected " +
              std::to_string(channels));
    }
  };
  auto check_mask = [&](const LabelGrid& mask, const std::string& what) {
    if (mask.height() != episode.image_height || mask.width() != episode.image_width) {
      invalid(what + " is not at image resolution");
    }
    for (std::uint8_t label : mask.labels()) {
      if (label != kIgnoreLabel && label > n_way) {
        invalid(what + " has label " + std::to_string(label) + " beyond the class count");
      }
    }
  };

  for (std::size_t c = 0; c < n_way; ++c) {
    if (episode.support[c].size() != k_shot) invalid("ragged support shots");
    for (std::size_t k = 0; k < k_shot; ++k) {
      const std::string what = "support " + std::to_string(c) + "/" + std::to_string(k);
      const LabeledGrid& shot = episode.support[c][k];
      check_grid(shot.features, what);
      check_mask(shot.mask, what);
      const auto labels = shot.mask.labels();
      if (std::find(labels.begin(), labels.end(), static_cast<std::uint8_t>(c + 1)) ==
          labels.end()) {
        invalid(what + " mask does not contain its designated class");
      }
    }
  }
  for (std::size_t i = 0; i < episode.unlabeled.size(); ++i) {
    check_grid(episode.unlabeled[i], "unlabeled " + std::to_string(i));
  }
  for (std::size_t j = 0; j < episode.queries.size(); ++j) {
    check_grid(episode.queries[j].features, "query " + std::to_string(j));
    check_mask(episode.queries[j].mask, "query " + std::to_string(j));
  }
}

void validate(const HyperParams& p) {
  if (p.n_parts < 1) bad_config("n_parts must be >= 1");
  if (p.n_regions < 1) bad_config("n_regions must be >= 1");
  if (!std::isfinite(p.sigma)) bad_config("sigma must be finite");
  if (!(p.lambda_p >= 0.0) || !std::isfinite(p.lambda_p)) bad_config("lambda_p must be >= 0");
  if (!(p.lambda_r >= 0.0) || !std::isfinite(p.lambda_r)) bad_config("lambda_r must be >= 0");
  if (!(p.score_temperature > 0.0) || !std::isfinite(p.score_temperature)) {
    bad_config("score_temperature must be > 0");
  }
  if (p.kmeans_max_iter < 1) bad_config("kmeans_max_iter must be >= 1");
  if (!(p.kmeans_tol >= 0.0)) bad_config("kmeans_tol must be >= 0");
  if (!(p.slic_compactness >= 0.0)) bad_config("slic_compactness must be >= 0");
}

std::vector<std::vector<LabelGrid>> support_masks_at_feature_resolution(const Episode& episode) {
  std::vector<std::vector<LabelGrid>> out;
  out.reserve(episode.support.size());
  for (const auto& shots : episode.support) {
    auto& row = out.emplace_back();
    for (const LabeledGrid& shot : shots) {
      row.push_back(
          resize_mask_nearest(shot.mask, shot.features.height(), shot.features.width()));
    }
  }
  return out;
}

LabelGrid to_class_ids(const LabelGrid& mask, const std::vector<std::int32_t>& class_list) {
  LabelGrid out = mask;
  for (std::uint8_t& label : out.labels()) {
    if (label == 0 || label == kIgnoreLabel) continue;
    if (label > class_list.size()) {
      throw Error(ErrorKind::kInvalidArgument, "label beyond class list");
    }
    label = static_cast<std::uint8_t>(class_list[label - 1]);
  }
  return out;
}

}  // namespace partproto
