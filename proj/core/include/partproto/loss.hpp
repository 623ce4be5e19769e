#pragma once

#include <cstdint>

#include "partproto/episode.hpp"
#include "partproto/matcher.hpp"
#include "partproto/pipeline.hpp"

namespace partproto {

struct EpisodeLoss {
  double query_ce = 0.0;
  double support_ce = 0.0;
  double total = 0.0;
};

/// Mean over non-IGNORE cells of -log softmax(temperature * scores)[label],
/// where `target` holds channel indices at the stack's resolution. Returns 0
/// when every cell is ignored.
double meta_cross_entropy_loss(const ScoreStack& stack, const LabelGrid& target, double temperature);

/// Query term averaged over queries plus support term averaged over
/// labeled shots, both scored against the same refined prototypes.
EpisodeLoss episode_loss(const Episode& episode, const EpisodePrototypes& prototypes,
                         double temperature);

}  // namespace partproto
