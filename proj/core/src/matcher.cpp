#include "partproto/matcher.hpp"

#include <cmath>
#include <string>

#include "partproto/errors.hpp"

namespace partproto {

std::vector<ScoreGrid> part_score_maps(const FeatureGrid& query, const PrototypeSet& refined) {
  require_stage(refined, PrototypeStage::kRefined, "part_score_maps");
  const std::size_t channels = query.channels();
  std::vector<double> proto_norms;
  for (const auto& p : refined.prototypes) {
    if (p.size() != channels) {
      throw Error(ErrorKind::kDimensionMismatch,
                  "part_score_maps: prototype has " + std::to_string(p.size()) +
                      " channels, query has " + std::to_string(channels));
    }
    const double norm = std::sqrt(squared_norm(p));
    if (norm <= kMinNorm) throw Error(ErrorKind::kZeroNormVector, "part_score_maps: zero-norm prototype");
    proto_norms.push_back(norm);
  }

  std::vector<std::vector<float>> maps(refined.size(), std::vector<float>(query.cell_count()));
  for (std::size_t idx = 0; idx < query.cell_count(); ++idx) {
    const auto f = query.cell(idx);
    const double ff = squared_norm(f);
    if (std::sqrt(ff) <= kMinNorm) {
      throw Error(ErrorKind::kZeroNormVector,
                  "part_score_maps: zero-norm query cell " + std::to_string(idx));
    }
    for (std::size_t j = 0; j < refined.size(); ++j) {
      const double pp = proto_norms[j] * proto_norms[j];
      maps[j][idx] = static_cast<float>(dot(f, refined.prototypes[j]) / std::sqrt(ff * pp));
    }
  }
  std::vector<ScoreGrid> out;
  out.reserve(maps.size());
  for (auto& m : maps) out.emplace_back(query.height(), query.width(), std::move(m));
  return out;
}

ScoreStack fuse_and_stack(const std::vector<std::vector<ScoreGrid>>& per_class_maps) {
  ScoreStack stack;
  if (per_class_maps.empty()) return stack;
  if (per_class_maps.front().empty()) {
    throw Error(ErrorKind::kInvalidArgument, "fuse_and_stack: class without part maps");
  }
  const std::size_t h = per_class_maps.front().front().height();
  const std::size_t w = per_class_maps.front().front().width();
  for (const auto& parts : per_class_maps) {
    if (parts.empty()) throw Error(ErrorKind::kInvalidArgument, "fuse_and_stack: class without part maps");
    ScoreGrid fused = parts.front();
    if (fused.height() != h || fused.width() != w) {
      throw Error(ErrorKind::kDimensionMismatch, "fuse_and_stack: score maps differ in size");
    }
    auto out = fused.values();
    for (std::size_t j = 1; j < parts.size(); ++j) {
      if (parts[j].height() != h || parts[j].width() != w) {
        throw Error(ErrorKind::kDimensionMismatch, "fuse_and_stack: score maps differ in size");
      }
      const auto in = parts[j].values();
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], in[i]);
    }
    stack.channels.push_back(std::move(fused));
  }
  return stack;
}

LabelGrid predict_query_mask(const ScoreStack& stack, std::size_t out_height, std::size_t out_width,
                             const std::vector<std::int32_t>& class_list) {
  if (stack.class_count() != class_list.size() + 1) {
    throw Error(ErrorKind::kDimensionMismatch,
                "predict_query_mask: stack has " + std::to_string(stack.class_count()) +
                    " channels for " + std::to_string(class_list.size()) + " classes");
  }
  std::vector<ScoreGrid> upsampled;
  upsampled.reserve(stack.class_count());
  for (const auto& channel : stack.channels) {
    upsampled.push_back(upsample_bilinear(channel, out_height, out_width));
  }
  LabelGrid out(out_height, out_width, std::uint8_t{0});
  auto labels = out.labels();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::size_t best = 0;
    float best_score = upsampled[0].values()[i];
    for (std::size_t c = 1; c < upsampled.size(); ++c) {
      const float s = upsampled[c].values()[i];
      if (s > best_score) {
        best_score = s;
        best = c;
      }
    }
    labels[i] = best == 0 ? std::uint8_t{0} : static_cast<std::uint8_t>(class_list[best - 1]);
  }
  return out;
}

LabelGrid argmax_channels(const ScoreStack& stack) {
  LabelGrid out(stack.height(), stack.width(), std::uint8_t{0});
  auto labels = out.labels();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < stack.class_count(); ++c) {
      if (stack.channels[c].values()[i] > stack.channels[best].values()[i]) best = c;
    }
    labels[i] = static_cast<std::uint8_t>(best);
  }
  return out;
}

}  // namespace partproto
