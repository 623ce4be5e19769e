#include "partproto/synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "partproto/errors.hpp"
#include "partproto/rng.hpp"

namespace partproto {

namespace {

[[noreturn]] void bad(const std::string& why) {
  throw Error(ErrorKind::kInvalidConfig, "invalid synthetic config: " + why);
}

// Fixed per-identity mean of norm `separation`; identity 0 is background.
std::vector<double> class_mean(const SynthConfig& cfg, std::int32_t identity) {
  Rng rng(mix_seed(cfg.world_seed, static_cast<std::uint64_t>(identity)));
  std::vector<double> v(cfg.channels);
  double norm = 0.0;
  for (double& x : v) {
    x = rng.normal();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x *= cfg.separation / norm;
  return v;
}

struct Instance {
  std::uint8_t label;
  std::vector<double> mean;  // class mean plus this instance's offset
};

class ImageBuilder {
 public:
  ImageBuilder(const SynthConfig& cfg, const std::vector<std::vector<double>>& means, Rng& rng)
      : cfg_(cfg), means_(means), rng_(rng) {}

  // Paints blobs of the given episode-local labels over a background.
  LabeledGrid build(const std::vector<std::uint8_t>& labels) {
    const std::size_t h = cfg_.grid_height;
    const std::size_t w = cfg_.grid_width;
    std::vector<std::uint8_t> cells(h * w, 0);
    std::vector<Instance> instances{instance(0)};
    std::vector<std::size_t> owner(h * w, 0);
    const double side = static_cast<double>(std::min(h, w));
    for (std::uint8_t label : labels) {
      const std::size_t blobs =
          cfg_.blobs_min + rng_.index(cfg_.blobs_max - cfg_.blobs_min + 1);
      for (std::size_t b = 0; b < blobs; ++b) {
        const double radius = std::max(0.5, side * rng_.uniform(cfg_.radius_min, cfg_.radius_max));
        const double cy = rng_.uniform(0.0, static_cast<double>(h));
        const double cx = rng_.uniform(0.0, static_cast<double>(w));
        instances.push_back(instance(label));
        bool painted = false;
        for (std::size_t r = 0; r < h; ++r) {
          for (std::size_t c = 0; c < w; ++c) {
            const double dy = static_cast<double>(r) + 0.5 - cy;
            const double dx = static_cast<double>(c) + 0.5 - cx;
            if (dy * dy + dx * dx <= radius * radius) {
              cells[r * w + c] = label;
              owner[r * w + c] = instances.size() - 1;
              painted = true;
            }
          }
        }
        if (!painted) {
          const std::size_t r = std::min(h - 1, static_cast<std::size_t>(cy));
          const std::size_t c = std::min(w - 1, static_cast<std::size_t>(cx));
          cells[r * w + c] = label;
          owner[r * w + c] = instances.size() - 1;
        }
      }
    }
    // Later blobs may cover earlier ones entirely; repaint a lost label at
    // the center of its last blob so every requested label is present.
    for (std::uint8_t label : labels) {
      if (std::find(cells.begin(), cells.end(), label) != cells.end()) continue;
      for (std::size_t i = instances.size(); i-- > 1;) {
        if (instances[i].label != label) continue;
        const std::size_t idx = rng_.index(h * w);
        cells[idx] = label;
        owner[idx] = i;
        break;
      }
    }

    const double cell_sd = cfg_.jitter * std::sqrt(1.0 - cfg_.instance_share);
    std::vector<float> features(h * w * cfg_.channels);
    for (std::size_t idx = 0; idx < h * w; ++idx) {
      const auto& mean = instances[owner[idx]].mean;
      for (std::size_t ch = 0; ch < cfg_.channels; ++ch) {
        const double noise = cell_sd > 0.0 ? cell_sd * rng_.normal() : 0.0;
        features[idx * cfg_.channels + ch] = static_cast<float>(mean[ch] + noise);
      }
    }

    const std::size_t s = cfg_.image_stride;
    LabelGrid mask(h * s, w * s, std::uint8_t{0});
    for (std::size_t y = 0; y < h * s; ++y) {
      for (std::size_t x = 0; x < w * s; ++x) mask.at(y, x) = cells[(y / s) * w + x / s];
    }
    return {FeatureGrid(h, w, cfg_.channels, std::move(features)), std::move(mask)};
  }

 private:
  Instance instance(std::uint8_t label) {
    Instance inst{label, means_[label]};
    const double sd = cfg_.jitter * std::sqrt(cfg_.instance_share);
    if (sd > 0.0) {
      for (double& v : inst.mean) v += sd * rng_.normal();
    }
    return inst;
  }

  const SynthConfig& cfg_;
  const std::vector<std::vector<double>>& means_;
  Rng& rng_;
};

// A non-empty random subset of the labels 1..n_way.
std::vector<std::uint8_t> random_label_subset(std::size_t n_way, Rng& rng) {
  std::vector<std::uint8_t> labels;
  for (std::size_t c = 1; c <= n_way; ++c) {
    if (n_way == 1 || rng.uniform() < 0.5) labels.push_back(static_cast<std::uint8_t>(c));
  }
  if (labels.empty()) labels.push_back(static_cast<std::uint8_t>(1 + rng.index(n_way)));
  return labels;
}

}  // namespace

void validate(const SynthConfig& c) {
  if (c.channels == 0) bad("channels must be positive");
  if (c.grid_height == 0 || c.grid_width == 0) bad("grid must be at least 1x1");
  if (c.image_stride == 0) bad("image_stride must be positive");
  if (c.n_way == 0 || c.k_shot == 0 || c.n_query == 0) bad("n_way, k_shot and n_query must be positive");
  if (c.blobs_min == 0 || c.blobs_max < c.blobs_min) bad("need 1 <= blobs_min <= blobs_max");
  if (!(c.radius_min > 0.0) || c.radius_max < c.radius_min) bad("need 0 < radius_min <= radius_max");
  if (!(c.jitter >= 0.0)) bad("jitter must be >= 0");
  if (!(c.instance_share >= 0.0 && c.instance_share <= 1.0)) bad("instance_share must lie in [0, 1]");
  if (!(c.separation > c.jitter)) bad("separation must exceed jitter");
  if (c.class_pool < c.n_way || c.class_pool >= kIgnoreLabel) {
    bad("class_pool must be in [n_way, 254]");
  }
}

Episode generate_synthetic_episode(const SynthConfig& config) {
  validate(config);
  Rng rng(config.seed);

  Episode episode;
  std::vector<std::int32_t> identities;
  for (std::size_t i = 1; i <= config.class_pool; ++i) identities.push_back(static_cast<std::int32_t>(i));
  for (std::size_t i = 0; i < config.n_way; ++i) {
    std::swap(identities[i], identities[i + rng.index(identities.size() - i)]);
    episode.class_list.push_back(identities[i]);
  }

  std::vector<std::vector<double>> means{class_mean(config, 0)};
  for (std::int32_t id : episode.class_list) means.push_back(class_mean(config, id));
  ImageBuilder builder(config, means, rng);

  episode.support.resize(config.n_way);
  for (std::size_t c = 0; c < config.n_way; ++c) {
    for (std::size_t k = 0; k < config.k_shot; ++k) {
      episode.support[c].push_back(builder.build({static_cast<std::uint8_t>(c + 1)}));
    }
  }
  for (std::size_t j = 0; j < config.n_query; ++j) {
    episode.queries.push_back(builder.build(random_label_subset(config.n_way, rng)));
  }
  for (std::size_t i = 0; i < config.n_unlabeled; ++i) {
    episode.unlabeled.push_back(builder.build(random_label_subset(config.n_way, rng)).features);
  }
  episode.image_height = config.grid_height * config.image_stride;
  episode.image_width = config.grid_width * config.image_stride;
  validate(episode);
  return episode;
}

}  // namespace partproto
