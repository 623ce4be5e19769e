#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "partproto/clustering.hpp"
#include "partproto/prototypes.hpp"
#include "partproto/tensor.hpp"

namespace partproto {

/// The dim x dim linear map applied to region messages (row-major). In
/// nonparametric mode the matrix is ignored and messages pass through
/// unchanged.
struct MessageWeights {
  std::size_t dim = 0;
  std::vector<float> matrix;
  bool nonparametric = false;

  /// Default for an untrained model: 0.1 * identity.
  static MessageWeights scaled_identity(std::size_t dim, float scale = 0.1f);

  float at(std::size_t row, std::size_t col) const { return matrix[row * dim + col]; }
};

/// Writes `gnn_weight` plus a manifest carrying the `nonparametric` flag.
void write_weights_archive(const MessageWeights& weights, const std::filesystem::path& path);
MessageWeights read_weights_archive(const std::filesystem::path& path);

/// Selected regions after one round of message passing.
struct AugmentedRegionSet {
  std::vector<FeatureVector> regions;
  std::vector<RegionSource> sources;

  std::size_t size() const noexcept { return regions.size(); }
  bool empty() const noexcept { return regions.empty(); }
};

/// Keeps the regions whose cosine to at least one prototype exceeds
/// `sigma`, in pool order.
RegionPool select_relevant_regions(const RegionPool& pool, const PrototypeSet& contextual,
                                   double sigma);

/// Z_i = sum_{j != i} max(cos(r_i, r_j), 0) + kNormalizerEps.
inline constexpr double kNormalizerEps = 1e-8;

/// Similarity-weighted neighbour average m_i = (1/Z_i) sum_{j != i} s_ij r_j
/// for every region, before the weight matrix is applied.
std::vector<std::vector<double>> neighbour_messages(std::span<const FeatureVector> regions);

/// r~_i = r_i + ReLU(W m_i) (or ReLU(m_i) in nonparametric mode), one
/// fully-connected round.
AugmentedRegionSet propagate_region_features(const RegionPool& selected,
                                             const MessageWeights& weights);

/// Row i holds the weights of prototype i over the augmented regions.
std::vector<std::vector<double>> refinement_weights(std::span<const FeatureVector> prototypes,
                                                    std::span<const FeatureVector> regions);

/// p^r_i = p_i + lambda_r * sum_j phi_ij r~_j. An empty region set or
/// lambda_r == 0 leaves the values untouched; the stage always advances.
PrototypeSet refine_with_regions(const PrototypeSet& contextual, const AugmentedRegionSet& augmented,
                                 double lambda_r);

}  // namespace partproto
