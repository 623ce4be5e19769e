#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "partproto/episode.hpp"
#include "partproto/loss.hpp"
#include "partproto/refine.hpp"

namespace partproto {

/// Discrete structure of one class held fixed while differentiating:
/// contextual prototypes, the selected regions and their neighbour
/// messages (which do not depend on W).
struct FrozenClass {
  std::vector<std::vector<double>> prototypes;
  std::vector<std::vector<double>> regions;
  std::vector<std::vector<double>> messages;
};

/// A support or query grid that contributes a cross-entropy term.
struct FrozenImage {
  FeatureGrid features;
  LabelGrid target;  // channel indices at feature resolution
  double weight;     // 1/N_q for queries, 1/(C*K) for supports
  bool is_query;
};

struct FrozenEpisode {
  std::vector<FrozenClass> classes;  // by episode-local label
  std::vector<FrozenImage> images;
  double temperature = 1.0;
  double lambda_r = 0.0;
};

/// Runs clustering, region generation and selection once; none of them
/// depend on the message weights.
FrozenEpisode freeze_episode(const Episode& episode, const HyperParams& params, std::uint64_t seed);

struct GradientResult {
  std::size_t dim = 0;
  std::vector<double> gradient;  // dim x dim, row-major
  EpisodeLoss loss;
  /// argmax[image][class][cell]: winning part index of the max-pool.
  std::vector<std::vector<std::vector<std::uint32_t>>> argmax;
};

/// Loss and dL/dW on a frozen episode, evaluated in double precision. The
/// max-pool winners of this forward pass are recorded and held fixed;
/// ReLU and the similarity clamps use the forward sign.
GradientResult message_weight_gradient(const FrozenEpisode& frozen, const MessageWeights& weights);

/// freeze_episode followed by message_weight_gradient. Throws
/// NonparametricMode when either the weights or the params disable W.
/// Returns an exactly zero gradient when W is unused (no unlabeled grids,
/// no selected region, or lambda_r == 0).
GradientResult approx_gradient_message_weights(const Episode& episode, const MessageWeights& weights,
                                               const HyperParams& params, std::uint64_t seed);

}  // namespace partproto
