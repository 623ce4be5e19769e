#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace partproto {

/// Label value excluded from prototypes, losses and metrics.
inline constexpr std::uint8_t kIgnoreLabel = 255;

using FeatureVector = std::vector<float>;

/// H x W x C backbone features, row-major and channel-last. All values are
/// finite; construction rejects anything else.
class FeatureGrid {
 public:
  FeatureGrid(std::size_t height, std::size_t width, std::size_t channels,
              std::vector<float> values);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t cell_count() const noexcept { return height_ * width_; }

  std::span<const float> values() const noexcept { return values_; }
  std::span<const float> cell(std::size_t index) const noexcept {
    return {values_.data() + index * channels_, channels_};
  }
  std::span<const float> cell(std::size_t row, std::size_t col) const noexcept {
    return cell(row * width_ + col);
  }

 private:
  std::size_t height_;
  std::size_t width_;
  std::size_t channels_;
  std::vector<float> values_;
};

/// H x W integer class map. Labels are 0 (background), 1..C, or kIgnoreLabel.
class LabelGrid {
 public:
  LabelGrid(std::size_t height, std::size_t width, std::vector<std::uint8_t> labels);
  LabelGrid(std::size_t height, std::size_t width, std::uint8_t fill);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t cell_count() const noexcept { return height_ * width_; }

  std::span<const std::uint8_t> labels() const noexcept { return labels_; }
  std::span<std::uint8_t> labels() noexcept { return labels_; }
  std::uint8_t at(std::size_t row, std::size_t col) const noexcept {
    return labels_[row * width_ + col];
  }
  std::uint8_t& at(std::size_t row, std::size_t col) noexcept {
    return labels_[row * width_ + col];
  }

  friend bool operator==(const LabelGrid&, const LabelGrid&) = default;

 private:
  std::size_t height_;
  std::size_t width_;
  std::vector<std::uint8_t> labels_;
};

/// Single-channel H x W float map (one class or one part score map).
class ScoreGrid {
 public:
  ScoreGrid(std::size_t height, std::size_t width, std::vector<float> values);
  ScoreGrid(std::size_t height, std::size_t width, float fill);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }

  std::span<const float> values() const noexcept { return values_; }
  std::span<float> values() noexcept { return values_; }
  float at(std::size_t row, std::size_t col) const noexcept {
    return values_[row * width_ + col];
  }

 private:
  std::size_t height_;
  std::size_t width_;
  std::vector<float> values_;
};

double dot(std::span<const float> a, std::span<const float> b);
double squared_norm(std::span<const float> a);

/// Norms at or below this are treated as zero vectors.
inline constexpr double kMinNorm = 1e-12;

/// dot(a,b) / (|a| |b|), accumulated in double.
/// Throws ZeroNormVector or DimensionMismatch.
double cosine_similarity(std::span<const float> a, std::span<const float> b);

/// Cosine clamped to [0, 1]; zero-norm inputs give 0 instead of throwing.
/// This is the similarity used inside every attention normalization.
double clamped_cosine(std::span<const float> a, std::span<const float> b);

/// Nearest-neighbour resize with center-aligned coordinates and
/// round-half-down, so labels are never blended.
LabelGrid resize_mask_nearest(const LabelGrid& mask, std::size_t out_height,
                              std::size_t out_width);

/// Align-corners bilinear resize of a single score channel.
ScoreGrid upsample_bilinear(const ScoreGrid& scores, std::size_t out_height,
                            std::size_t out_width);

/// Feature columns whose mask label equals `class_label`, row-major order.
std::vector<FeatureVector> gather_class_features(const FeatureGrid& grid,
                                                 const LabelGrid& mask,
                                                 std::uint8_t class_label);

/// Every feature column of the grid, row-major order.
std::vector<FeatureVector> gather_all_features(const FeatureGrid& grid);

}  // namespace partproto
