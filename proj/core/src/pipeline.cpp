#include "partproto/pipeline.hpp"

#include <algorithm>
#include <set>

#include "partproto/errors.hpp"
#include "partproto/rng.hpp"

namespace partproto {

namespace {

// Feature cells touched by at least one pixel of `label`.
std::vector<FeatureVector> covered_cells(const LabeledGrid& shot, std::uint8_t label) {
  const FeatureGrid& grid = shot.features;
  const LabelGrid& mask = shot.mask;
  std::set<std::size_t> cells;
  for (std::size_t y = 0; y < mask.height(); ++y) {
    for (std::size_t x = 0; x < mask.width(); ++x) {
      if (mask.at(y, x) != label) continue;
      const std::size_t r = y * grid.height() / mask.height();
      const std::size_t c = x * grid.width() / mask.width();
      cells.insert(r * grid.width() + c);
    }
  }
  std::vector<FeatureVector> out;
  for (std::size_t idx : cells) {
    const auto f = grid.cell(idx);
    out.emplace_back(f.begin(), f.end());
  }
  return out;
}

}  // namespace

std::vector<std::vector<FeatureVector>> support_class_features(const Episode& episode) {
  const std::size_t labels = episode.n_way() + 1;
  const auto masks = support_masks_at_feature_resolution(episode);
  std::vector<std::vector<FeatureVector>> out(labels);
  for (std::size_t l = 0; l < labels; ++l) {
    for (std::size_t c = 0; c < episode.support.size(); ++c) {
      for (std::size_t k = 0; k < episode.support[c].size(); ++k) {
        auto feats = gather_class_features(episode.support[c][k].features, masks[c][k],
                                           static_cast<std::uint8_t>(l));
        std::move(feats.begin(), feats.end(), std::back_inserter(out[l]));
      }
    }
    if (!out[l].empty()) continue;
    for (const auto& shots : episode.support) {
      for (const auto& shot : shots) {
        auto feats = covered_cells(shot, static_cast<std::uint8_t>(l));
        std::move(feats.begin(), feats.end(), std::back_inserter(out[l]));
      }
    }
  }
  return out;
}

RegionPool build_region_pool(const std::vector<FeatureGrid>& unlabeled, const HyperParams& params) {
  RegionPool pool;
  const std::size_t per_grid = regions_per_grid(params.n_regions, unlabeled.size());
  for (std::size_t i = 0; i < unlabeled.size(); ++i) {
    const Partition regions = slic_feature_regions(unlabeled[i], per_grid, params.slic_compactness,
                                                   params.slic_iters);
    pool.append(pool_regions(unlabeled[i], regions, i));
  }
  return pool;
}

EpisodePrototypes build_episode_prototypes(const Episode& episode, const HyperParams& params,
                                           const MessageWeights& weights, std::uint64_t seed) {
  const auto features = support_class_features(episode);
  const KMeansOptions kmeans_options{params.kmeans_max_iter, params.kmeans_tol};
  MessageWeights effective = weights;
  effective.nonparametric = weights.nonparametric || params.nonparametric_gnn;

  EpisodePrototypes out;
  for (std::size_t l = 0; l < features.size(); ++l) {
    const auto label = static_cast<std::uint8_t>(l);
    PrototypeSet initial =
        initial_part_prototypes(label, features[l], params.n_parts, mix_seed(seed, l), kmeans_options);
    out.contextual.push_back(add_class_context(initial, params.lambda_p));
  }

  const bool use_unlabeled = params.lambda_r != 0.0 && !episode.unlabeled.empty();
  if (use_unlabeled) out.pool = build_region_pool(episode.unlabeled, params);
  for (const PrototypeSet& contextual : out.contextual) {
    RegionPool selected = use_unlabeled ? select_relevant_regions(out.pool, contextual, params.sigma)
                                        : RegionPool{};
    AugmentedRegionSet augmented = propagate_region_features(selected, effective);
    out.refined.push_back(refine_with_regions(contextual, augmented, params.lambda_r));
    out.selected.push_back(std::move(selected));
    out.augmented.push_back(std::move(augmented));
  }
  return out;
}

ScoreStack score_grid(const FeatureGrid& grid, const std::vector<PrototypeSet>& refined) {
  std::vector<std::vector<ScoreGrid>> per_class;
  per_class.reserve(refined.size());
  for (const PrototypeSet& set : refined) per_class.push_back(part_score_maps(grid, set));
  return fuse_and_stack(per_class);
}

std::vector<LabelGrid> predict_queries(const Episode& episode, const EpisodePrototypes& prototypes) {
  std::vector<LabelGrid> out;
  out.reserve(episode.queries.size());
  for (const LabeledGrid& query : episode.queries) {
    const ScoreStack stack = score_grid(query.features, prototypes.refined);
    out.push_back(
        predict_query_mask(stack, episode.image_height, episode.image_width, episode.class_list));
  }
  return out;
}

}  // namespace partproto
