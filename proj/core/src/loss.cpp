#include "partproto/loss.hpp"

#include <cmath>
#include <vector>

#include "partproto/errors.hpp"

namespace partproto {

double meta_cross_entropy_loss(const ScoreStack& stack, const LabelGrid& target, double temperature) {
  if (stack.height() != target.height() || stack.width() != target.width()) {
    throw Error(ErrorKind::kDimensionMismatch, "cross entropy: score and label sizes differ");
  }
  if (!(temperature > 0.0)) throw Error(ErrorKind::kInvalidArgument, "temperature must be > 0");
  const std::size_t classes = stack.class_count();
  const auto labels = target.labels();
  std::vector<double> logits(classes);
  double sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kIgnoreLabel) continue;
    if (labels[i] >= classes) {
      throw Error(ErrorKind::kDimensionMismatch, "cross entropy: label beyond score channels");
    }
    double peak = -INFINITY;
    for (std::size_t c = 0; c < classes; ++c) {
      logits[c] = temperature * static_cast<double>(stack.channels[c].values()[i]);
      peak = std::max(peak, logits[c]);
    }
    double z = 0.0;
    for (double v : logits) z += std::exp(v - peak);
    sum += peak + std::log(z) - logits[labels[i]];
    ++counted;
  }
  return counted == 0 ? 0.0 : sum / static_cast<double>(counted);
}

EpisodeLoss episode_loss(const Episode& episode, const EpisodePrototypes& prototypes,
                         double temperature) {
  EpisodeLoss loss;
  for (const LabeledGrid& query : episode.queries) {
    const LabelGrid target =
        resize_mask_nearest(query.mask, query.features.height(), query.features.width());
    loss.query_ce += meta_cross_entropy_loss(score_grid(query.features, prototypes.refined), target,
                                             temperature);
  }
  loss.query_ce /= static_cast<double>(episode.queries.size());

  const auto masks = support_masks_at_feature_resolution(episode);
  std::size_t shots = 0;
  for (std::size_t c = 0; c < episode.support.size(); ++c) {
    for (std::size_t k = 0; k < episode.support[c].size(); ++k) {
      loss.support_ce += meta_cross_entropy_loss(
          score_grid(episode.support[c][k].features, prototypes.refined), masks[c][k], temperature);
      ++shots;
    }
  }
  if (shots > 0) loss.support_ce /= static_cast<double>(shots);
  loss.total = loss.query_ce + loss.support_ce;
  return loss;
}

}  // namespace partproto
