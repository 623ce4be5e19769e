#include "partproto/refine.hpp"

#include <cmath>
#include <string>

#include "archive_util.hpp"
#include "partproto/errors.hpp"

namespace partproto {

MessageWeights MessageWeights::scaled_identity(std::size_t dim, float scale) {
  MessageWeights w;
  w.dim = dim;
  w.matrix.assign(dim * dim, 0.0f);
  for (std::size_t i = 0; i < dim; ++i) w.matrix[i * dim + i] = scale;
  return w;
}

void write_weights_archive(const MessageWeights& weights, const std::filesystem::path& path) {
  if (weights.matrix.size() != weights.dim * weights.dim) {
    throw Error(ErrorKind::kDimensionMismatch, "message weights are not square");
  }
  nlohmann::json manifest;
  manifest["kind"] = "message_weights";
  manifest["nonparametric"] = weights.nonparametric;
  detail::write_archive(path, {{"gnn_weight", npy::from_floats({weights.dim, weights.dim}, weights.matrix)}},
                        std::move(manifest));
}

MessageWeights read_weights_archive(const std::filesystem::path& path) {
  const detail::ArchiveContents archive(path);
  const npy::Array array = archive.array("gnn_weight");
  if (array.dtype != npy::DType::kFloat32 || array.shape.size() != 2 ||
      array.shape[0] != array.shape[1]) {
    archive.fail("gnn_weight must be a square float32 matrix");
  }
  MessageWeights w;
  w.dim = array.shape[0];
  w.matrix = npy::to_floats(array);
  const auto& manifest = archive.manifest();
  if (manifest.contains("nonparametric")) {
    if (!manifest["nonparametric"].is_boolean()) archive.fail("nonparametric must be a boolean");
    w.nonparametric = manifest["nonparametric"].get<bool>();
  }
  for (float v : w.matrix) {
    if (!std::isfinite(v)) archive.fail("gnn_weight has non-finite entries");
  }
  return w;
}

RegionPool select_relevant_regions(const RegionPool& pool, const PrototypeSet& contextual,
                                   double sigma) {
  require_stage(contextual, PrototypeStage::kContextual, "select_relevant_regions");
  RegionPool selected;
  for (std::size_t j = 0; j < pool.size(); ++j) {
    bool relevant = false;
    for (const auto& p : contextual.prototypes) {
      // Zero-norm regions have no direction and are never relevant.
      const double n1 = std::sqrt(squared_norm(p));
      const double n2 = std::sqrt(squared_norm(pool.regions[j]));
      if (n1 <= kMinNorm || n2 <= kMinNorm) continue;
      if (cosine_similarity(p, pool.regions[j]) > sigma) {
        relevant = true;
        break;
      }
    }
    if (relevant) {
      selected.regions.push_back(pool.regions[j]);
      if (j < pool.sources.size()) selected.sources.push_back(pool.sources[j]);
    }
  }
  return selected;
}

std::vector<std::vector<double>> neighbour_messages(std::span<const FeatureVector> regions) {
  const std::size_t n = regions.size();
  const std::size_t dim = n == 0 ? 0 : regions.front().size();
  std::vector<std::vector<double>> messages(n, std::vector<double>(dim, 0.0));
  if (n < 2) return messages;

  std::vector<std::vector<double>> sim(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      sim[i][j] = sim[j][i] = clamped_cosine(regions[i], regions[j]);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double z = kNormalizerEps;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) z += sim[i][j];
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || sim[i][j] == 0.0) continue;
      const double w = sim[i][j] / z;
      for (std::size_t d = 0; d < dim; ++d) messages[i][d] += w * regions[j][d];
    }
  }
  return messages;
}

AugmentedRegionSet propagate_region_features(const RegionPool& selected,
                                             const MessageWeights& weights) {
  AugmentedRegionSet out{selected.regions, selected.sources};
  if (selected.empty()) return out;
  const std::size_t dim = selected.regions.front().size();
  if (!weights.nonparametric && (weights.dim != dim || weights.matrix.size() != dim * dim)) {
    throw Error(ErrorKind::kDimensionMismatch,
                "propagate_region_features: weight matrix is " + std::to_string(weights.dim) +
                    "x" + std::to_string(weights.dim) + ", regions have " + std::to_string(dim) +
                    " channels");
  }
  const auto messages = neighbour_messages(selected.regions);
  std::vector<double> activation(dim);
  for (std::size_t i = 0; i < selected.size(); ++i) {
    const auto& m = messages[i];
    if (weights.nonparametric) {
      activation = m;
    } else {
      for (std::size_t a = 0; a < dim; ++a) {
        double sum = 0.0;
        const float* row = weights.matrix.data() + a * dim;
        for (std::size_t b = 0; b < dim; ++b) sum += static_cast<double>(row[b]) * m[b];
        activation[a] = sum;
      }
    }
    for (std::size_t d = 0; d < dim; ++d) {
      // ReLU; non-positive activations leave the region value untouched.
      if (activation[d] > 0.0) {
        out.regions[i][d] =
            static_cast<float>(static_cast<double>(selected.regions[i][d]) + activation[d]);
      }
    }
  }
  return out;
}

std::vector<std::vector<double>> refinement_weights(std::span<const FeatureVector> prototypes,
                                                    std::span<const FeatureVector> regions) {
  std::vector<std::vector<double>> phi;
  phi.reserve(prototypes.size());
  std::vector<double> sims(regions.size());
  for (const auto& p : prototypes) {
    for (std::size_t j = 0; j < regions.size(); ++j) sims[j] = clamped_cosine(p, regions[j]);
    phi.push_back(normalize_attention(sims));
  }
  return phi;
}

PrototypeSet refine_with_regions(const PrototypeSet& contextual, const AugmentedRegionSet& augmented,
                                 double lambda_r) {
  require_stage(contextual, PrototypeStage::kContextual, "refine_with_regions");
  PrototypeSet out = contextual;
  out.stage = PrototypeStage::kRefined;
  if (augmented.empty() || lambda_r == 0.0) return out;

  const std::size_t dim = contextual.prototypes.front().size();
  if (augmented.regions.front().size() != dim) {
    throw Error(ErrorKind::kDimensionMismatch, "refine_with_regions: channel counts differ");
  }
  const auto phi = refinement_weights(contextual.prototypes, augmented.regions);
  for (std::size_t i = 0; i < contextual.size(); ++i) {
    std::vector<double> acc(dim, 0.0);
    for (std::size_t j = 0; j < augmented.size(); ++j) {
      for (std::size_t d = 0; d < dim; ++d) acc[d] += phi[i][j] * augmented.regions[j][d];
    }
    for (std::size_t d = 0; d < dim; ++d) {
      out.prototypes[i][d] = static_cast<float>(static_cast<double>(contextual.prototypes[i][d]) +
                                                lambda_r * acc[d]);
    }
  }
  return out;
}

}  // namespace partproto
