#include "partproto/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "partproto/errors.hpp"

namespace partproto {

namespace {

void require_positive_shape(std::size_t height, std::size_t width, const char* what) {
  if (height == 0 || width == 0) {
    throw Error(ErrorKind::kInvalidArgument, std::string(what) + " must be at least 1x1");
  }
}

// Round-half-down of a center-aligned source coordinate.
std::size_t nearest_source_index(std::size_t out_index, std::size_t in_size,
                                 std::size_t out_size) {
  const double src = (static_cast<double>(out_index) + 0.5) * static_cast<double>(in_size) /
                         static_cast<double>(out_size) -
                     0.5;
  const double rounded = std::ceil(src - 0.5);
  if (rounded <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(rounded), in_size - 1);
}

}  // namespace

FeatureGrid::FeatureGrid(std::size_t height, std::size_t width, std::size_t channels,
                         std::vector<float> values)
    : height_(height), width_(width), channels_(channels), values_(std::move(values)) {
  if (height_ == 0 || width_ == 0 || channels_ == 0) {
    throw Error(ErrorKind::kInvalidArgument, "feature grid dimensions must be positive");
  }
  if (values_.size() != height_ * width_ * channels_) {
    throw Error(ErrorKind::kDimensionMismatch,
                "feature grid has " + std::to_string(values_.size()) + " values, expected " +
                    std::to_string(height_ * width_ * channels_));
  }
  if (!std::all_of(values_.begin(), values_.end(), [](float v) { return std::isfinite(v); })) {
    throw Error(ErrorKind::kInvalidArgument, "feature grid contains non-finite values");
  }
}

LabelGrid::LabelGrid(std::size_t height, std::size_t width, std::vector<std::uint8_t> labels)
    : height_(height), width_(width), labels_(std::move(labels)) {
  require_positive_shape(height_, width_, "label grid");
  if (labels_.size() != height_ * width_) {
    throw Error(ErrorKind::kDimensionMismatch, "label grid size does not match its shape");
  }
}

LabelGrid::LabelGrid(std::size_t height, std::size_t width, std::uint8_t fill)
    : LabelGrid(height, width, std::vector<std::uint8_t>(height * width, fill)) {}

ScoreGrid::ScoreGrid(std::size_t height, std::size_t width, std::vector<float> values)
    : height_(height), width_(width), values_(std::move(values)) {
  require_positive_shape(height_, width_, "score grid");
  if (values_.size() != height_ * width_) {
    throw Error(ErrorKind::kDimensionMismatch, "score grid size does not match its shape");
  }
}

ScoreGrid::ScoreGrid(std::size_t height, std::size_t width, float fill)
    : ScoreGrid(height, width, std::vector<float>(height * width, fill)) {}

double dot(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "vector lengths differ");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return sum;
}

double squared_norm(std::span<const float> a) {
  double sum = 0.0;
  for (float v : a) sum += static_cast<double>(v) * static_cast<double>(v);
  return sum;
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "cosine_similarity: vector lengths differ");
  }
  const double aa = squared_norm(a);
  const double bb = squared_norm(b);
  if (std::sqrt(aa) <= kMinNorm || std::sqrt(bb) <= kMinNorm) {
    throw Error(ErrorKind::kZeroNormVector, "cosine_similarity: zero-norm vector");
  }
  // sqrt(aa * bb) rather than sqrt(aa) * sqrt(bb): gives exactly 1 for a == b.
  return dot(a, b) / std::sqrt(aa * bb);
}

double clamped_cosine(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "clamped_cosine: vector lengths differ");
  }
  const double aa = squared_norm(a);
  const double bb = squared_norm(b);
  if (std::sqrt(aa) <= kMinNorm || std::sqrt(bb) <= kMinNorm) return 0.0;
  return std::max(0.0, dot(a, b) / std::sqrt(aa * bb));
}

LabelGrid resize_mask_nearest(const LabelGrid& mask, std::size_t out_height,
                              std::size_t out_width) {
  require_positive_shape(out_height, out_width, "resize target");
  std::vector<std::size_t> src_cols(out_width);
  for (std::size_t j = 0; j < out_width; ++j) {
    src_cols[j] = nearest_source_index(j, mask.width(), out_width);
  }
  LabelGrid out(out_height, out_width, std::uint8_t{0});
  for (std::size_t i = 0; i < out_height; ++i) {
    const std::size_t src_row = nearest_source_index(i, mask.height(), out_height);
    for (std::size_t j = 0; j < out_width; ++j) {
      out.at(i, j) = mask.at(src_row, src_cols[j]);
    }
  }
  return out;
}

ScoreGrid upsample_bilinear(const ScoreGrid& scores, std::size_t out_height,
                            std::size_t out_width) {
  require_positive_shape(out_height, out_width, "upsample target");
  struct Tap {
    std::size_t lo;
    std::size_t hi;
    double frac;
  };
  // Align corners: output index i samples source coordinate i * (in-1)/(out-1).
  auto taps_for = [](std::size_t in_size, std::size_t out_size) {
    std::vector<Tap> taps(out_size);
    const double scale = out_size > 1 ? static_cast<double>(in_size - 1) /
                                            static_cast<double>(out_size - 1)
                                      : 0.0;
    for (std::size_t i = 0; i < out_size; ++i) {
      const double src = static_cast<double>(i) * scale;
      std::size_t lo = std::min(static_cast<std::size_t>(std::floor(src)), in_size - 1);
      const std::size_t hi = std::min(lo + 1, in_size - 1);
      taps[i] = {lo, hi, src - static_cast<double>(lo)};
    }
    return taps;
  };
  const auto row_taps = taps_for(scores.height(), out_height);
  const auto col_taps = taps_for(scores.width(), out_width);

  std::vector<float> out(out_height * out_width);
  for (std::size_t i = 0; i < out_height; ++i) {
    const Tap& r = row_taps[i];
    for (std::size_t j = 0; j < out_width; ++j) {
      const Tap& c = col_taps[j];
      const double top = (1.0 - c.frac) * scores.at(r.lo, c.lo) + c.frac * scores.at(r.lo, c.hi);
      const double bottom =
          (1.0 - c.frac) * scores.at(r.hi, c.lo) + c.frac * scores.at(r.hi, c.hi);
      out[i * out_width + j] = static_cast<float>((1.0 - r.frac) * top + r.frac * bottom);
    }
  }
  return ScoreGrid(out_height, out_width, std::move(out));
}

std::vector<FeatureVector> gather_class_features(const FeatureGrid& grid, const LabelGrid& mask,
                                                 std::uint8_t class_label) {
  if (grid.height() != mask.height() || grid.width() != mask.width()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "gather_class_features: grid and mask spatial sizes differ");
  }
  std::vector<FeatureVector> out;
  if (class_label == kIgnoreLabel) return out;
  const auto labels = mask.labels();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == class_label) {
      const auto cell = grid.cell(i);
      out.emplace_back(cell.begin(), cell.end());
    }
  }
  return out;
}

std::vector<FeatureVector> gather_all_features(const FeatureGrid& grid) {
  std::vector<FeatureVector> out;
  out.reserve(grid.cell_count());
  for (std::size_t i = 0; i < grid.cell_count(); ++i) {
    const auto cell = grid.cell(i);
    out.emplace_back(cell.begin(), cell.end());
  }
  return out;
}

}  // namespace partproto
