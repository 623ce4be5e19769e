#include "partproto/prototypes.hpp"

#include <string>

#include "partproto/errors.hpp"

namespace partproto {

namespace {

const char* stage_name(PrototypeStage stage) {
  switch (stage) {
    case PrototypeStage::kInitial: return "initial";
    case PrototypeStage::kContextual: return "contextual";
    case PrototypeStage::kRefined: return "refined";
  }
  return "?";
}

}  // namespace

void require_stage(const PrototypeSet& set, PrototypeStage expected, const char* op) {
  if (set.stage != expected) {
    throw Error(ErrorKind::kStageMismatch, std::string(op) + ": expected " + stage_name(expected) +
                                               " prototypes, got " + stage_name(set.stage));
  }
}

std::vector<double> normalize_attention(std::span<const double> similarities) {
  std::vector<double> weights(similarities.begin(), similarities.end());
  if (weights.empty()) return weights;
  double total = 0.0;
  for (double s : weights) total += s;
  if (total <= kAttentionEps) {
    std::fill(weights.begin(), weights.end(), 1.0 / static_cast<double>(weights.size()));
  } else {
    for (double& w : weights) w /= total;
  }
  return weights;
}

PrototypeSet initial_part_prototypes(std::uint8_t class_label,
                                     std::span<const FeatureVector> class_features,
                                     std::size_t n_parts, std::uint64_t seed,
                                     const KMeansOptions& options) {
  if (class_features.empty()) {
    throw Error(ErrorKind::kEmptyClassFeatures,
                "no support features for class label " + std::to_string(class_label));
  }
  const KMeansResult clusters = kmeans(class_features, n_parts, seed, options);
  PrototypeSet set{class_label, {}, PrototypeStage::kInitial};
  set.prototypes.reserve(clusters.centroids.size());
  for (const auto& centroid : clusters.centroids) {
    set.prototypes.emplace_back(centroid.begin(), centroid.end());
  }
  return set;
}

std::vector<std::vector<double>> context_weights(std::span<const FeatureVector> prototypes) {
  const std::size_t n = prototypes.size();
  std::vector<std::vector<double>> mu(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    if (n == 1) break;
    std::vector<double> sims;
    sims.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) sims.push_back(clamped_cosine(prototypes[i], prototypes[j]));
    }
    const auto weights = normalize_attention(sims);
    for (std::size_t j = 0, w = 0; j < n; ++j) {
      if (j != i) mu[i][j] = weights[w++];
    }
  }
  return mu;
}

PrototypeSet add_class_context(const PrototypeSet& initial, double lambda_p) {
  require_stage(initial, PrototypeStage::kInitial, "add_class_context");
  PrototypeSet out = initial;
  out.stage = PrototypeStage::kContextual;
  if (lambda_p == 0.0 || initial.size() < 2) return out;

  const auto mu = context_weights(initial.prototypes);
  const std::size_t dim = initial.prototypes.front().size();
  for (std::size_t i = 0; i < initial.size(); ++i) {
    std::vector<double> context(dim, 0.0);
    for (std::size_t j = 0; j < initial.size(); ++j) {
      if (j == i) continue;
      for (std::size_t d = 0; d < dim; ++d) context[d] += mu[i][j] * initial.prototypes[j][d];
    }
    for (std::size_t d = 0; d < dim; ++d) {
      out.prototypes[i][d] =
          static_cast<float>(static_cast<double>(initial.prototypes[i][d]) + lambda_p * context[d]);
    }
  }
  return out;
}

}  // namespace partproto
