#pragma once

#include <cstdint>
#include <vector>

#include "partproto/clustering.hpp"
#include "partproto/episode.hpp"
#include "partproto/matcher.hpp"
#include "partproto/prototypes.hpp"
#include "partproto/refine.hpp"

namespace partproto {

/// Everything the forward pass builds from the support side of an episode.
/// Vectors indexed by class are indexed by episode-local label (0..C).
struct EpisodePrototypes {
  std::vector<PrototypeSet> contextual;
  RegionPool pool;
  std::vector<RegionPool> selected;
  std::vector<AugmentedRegionSet> augmented;
  std::vector<PrototypeSet> refined;
};

/// Labeled support features grouped by label 0..C across every shot. A
/// class that vanishes under nearest downsampling falls back to the cells
/// its pixels touch.
std::vector<std::vector<FeatureVector>> support_class_features(const Episode& episode);

/// SLIC regions of every unlabeled grid, the total budget split evenly.
RegionPool build_region_pool(const std::vector<FeatureGrid>& unlabeled, const HyperParams& params);

/// Part generation then per-class refinement. K-means for label l is seeded
/// with mix_seed(seed, l).
EpisodePrototypes build_episode_prototypes(const Episode& episode, const HyperParams& params,
                                           const MessageWeights& weights, std::uint64_t seed);

/// Fused background-first score stack of one grid.
ScoreStack score_grid(const FeatureGrid& grid, const std::vector<PrototypeSet>& refined);

/// Predicted masks (class identifiers, image resolution) for every query.
std::vector<LabelGrid> predict_queries(const Episode& episode, const EpisodePrototypes& prototypes);

}  // namespace partproto
