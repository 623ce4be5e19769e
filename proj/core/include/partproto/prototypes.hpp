#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "partproto/clustering.hpp"
#include "partproto/tensor.hpp"

namespace partproto {

enum class PrototypeStage { kInitial, kContextual, kRefined };

/// Part prototypes of one class. `class_label` is episode-local (0 is
/// background).
struct PrototypeSet {
  std::uint8_t class_label = 0;
  std::vector<FeatureVector> prototypes;
  PrototypeStage stage = PrototypeStage::kInitial;

  std::size_t size() const noexcept { return prototypes.size(); }
};

/// Throws StageMismatch unless `set.stage == expected`.
void require_stage(const PrototypeSet& set, PrototypeStage expected, const char* op);

/// Threshold below which an attention denominator counts as zero and the
/// weights fall back to uniform.
inline constexpr double kAttentionEps = 1e-8;

/// Normalizes non-negative similarities into attention weights. Falls back
/// to uniform weights when the sum does not exceed kAttentionEps.
std::vector<double> normalize_attention(std::span<const double> similarities);

/// K-means the class features into min(n_parts, |features|) groups and
/// average each group. Throws EmptyClassFeatures.
PrototypeSet initial_part_prototypes(std::uint8_t class_label,
                                     std::span<const FeatureVector> class_features,
                                     std::size_t n_parts, std::uint64_t seed,
                                     const KMeansOptions& options = {});

/// Row i holds the context weights of prototype i over the other
/// prototypes (entry i itself is 0).
std::vector<std::vector<double>> context_weights(std::span<const FeatureVector> prototypes);

/// p_i = p~_i + lambda_p * sum_{j != i} mu_ij p~_j with mu from
/// context_weights(). lambda_p == 0 returns the input values unchanged.
PrototypeSet add_class_context(const PrototypeSet& initial, double lambda_p);

}  // namespace partproto
