#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "partproto/tensor.hpp"

namespace partproto {

/// A feature grid with its annotation at original image resolution.
struct LabeledGrid {
  FeatureGrid features;
  LabelGrid mask;
};

/// One C-way K-shot task.
///
/// Masks use episode-local labels: 0 is background and label c + 1 marks
/// `class_list[c]`. `support[c][k]` is the k-th labeled shot of class c and
/// must contain at least one pixel of label c + 1. Unlabeled grids carry no
/// mask at all.
struct Episode {
  std::vector<std::int32_t> class_list;
  std::vector<std::vector<LabeledGrid>> support;
  std::vector<FeatureGrid> unlabeled;
  std::vector<LabeledGrid> queries;
  std::size_t image_height = 0;
  std::size_t image_width = 0;

  std::size_t n_way() const noexcept { return class_list.size(); }
  std::size_t k_shot() const noexcept { return support.empty() ? 0 : support.front().size(); }
  std::size_t channels() const noexcept;
};

/// Throws InvalidEpisode naming the first violated invariant.
void validate(const Episode& episode);

struct HyperParams {
  std::size_t n_parts = 5;
  std::size_t n_regions = 100;
  double sigma = 0.0;
  double lambda_p = 0.8;
  double lambda_r = 0.2;
  /// Softmax scale applied to cosine scores in the loss.
  double score_temperature = 20.0;
  bool nonparametric_gnn = false;
  std::size_t kmeans_max_iter = 50;
  double kmeans_tol = 1e-6;
  double slic_compactness = 0.1;
  std::size_t slic_iters = 10;
};

/// Throws InvalidConfig on the first out-of-range field.
void validate(const HyperParams& params);

/// Support masks downsampled to their feature grids, in support order.
std::vector<std::vector<LabelGrid>> support_masks_at_feature_resolution(const Episode& episode);

/// Maps episode-local labels to class identifiers; 0 and IGNORE are kept.
LabelGrid to_class_ids(const LabelGrid& mask, const std::vector<std::int32_t>& class_list);

}  // namespace partproto
