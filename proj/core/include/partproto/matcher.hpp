#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "partproto/prototypes.hpp"
#include "partproto/tensor.hpp"

namespace partproto {

/// Per-class score maps, channel 0 is background and channel c + 1 is the
/// c-th episode class.
struct ScoreStack {
  std::vector<ScoreGrid> channels;

  std::size_t class_count() const noexcept { return channels.size(); }
  std::size_t height() const noexcept { return channels.empty() ? 0 : channels.front().height(); }
  std::size_t width() const noexcept { return channels.empty() ? 0 : channels.front().width(); }
};

/// Cosine between every query cell and every refined prototype; map j
/// belongs to prototype j. Throws DimensionMismatch, ZeroNormVector or
/// StageMismatch.
std::vector<ScoreGrid> part_score_maps(const FeatureGrid& query, const PrototypeSet& refined);

/// Max over parts per class, stacked background-first.
ScoreStack fuse_and_stack(const std::vector<std::vector<ScoreGrid>>& per_class_maps);

/// Bilinear upsampling per channel followed by argmax (lowest channel wins
/// ties); channel c > 0 is reported as class_list[c - 1].
LabelGrid predict_query_mask(const ScoreStack& stack, std::size_t out_height,
                             std::size_t out_width, const std::vector<std::int32_t>& class_list);

/// Argmax over channels at the stack's own resolution, as channel indices.
LabelGrid argmax_channels(const ScoreStack& stack);

}  // namespace partproto
