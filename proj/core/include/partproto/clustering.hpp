#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "partproto/tensor.hpp"

namespace partproto {

/// Group index per item; every group in [0, group_count) is non-empty.
struct Partition {
  std::vector<std::size_t> assignments;
  std::size_t group_count = 0;
};

struct KMeansOptions {
  std::size_t max_iter = 50;
  /// Stop once the relative SSE improvement falls below this.
  double tol = 1e-6;
  /// Independent seedings; the lowest-SSE result is kept.
  std::size_t n_init = 1;
};

struct KMeansResult {
  Partition partition;
  std::vector<std::vector<double>> centroids;
  double sse = 0.0;
  /// Within-cluster SSE after each Lloyd assignment step.
  std::vector<double> sse_trace;
};

/// Lloyd's algorithm with greedy k-means++ seeding.
///
/// The effective group count is min(k, number of distinct points). Empty
/// groups are re-seeded from the point farthest from its centroid, and
/// centroids that collapse onto each other are merged. Ties between equally
/// near centroids go to the lower index. Throws EmptyInput.
KMeansResult kmeans(std::span<const FeatureVector> points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options = {});

inline Partition kmeans_partition(std::span<const FeatureVector> points, std::size_t k,
                                  std::uint64_t seed, const KMeansOptions& options = {}) {
  return kmeans(points, k, seed, options).partition;
}

/// Within-cluster sum of squared distances to group means.
double partition_sse(std::span<const FeatureVector> points, const Partition& partition);

/// SLIC-style clustering over a feature grid: cells are the pixels and
/// feature columns play the role of colour. Distance between a cell and a
/// center is |f - f_c| + compactness * |(r,c) - (r_c,c_c)| / S with
/// S = sqrt(H * W / n_regions). Region indices are compacted so that every
/// returned group is non-empty. Spatial connectivity is not enforced.
Partition slic_feature_regions(const FeatureGrid& grid, std::size_t n_regions,
                               double compactness, std::size_t iters);

struct RegionSource {
  std::size_t image_index = 0;
  std::vector<std::size_t> cells;
};

/// Mean-pooled region features with provenance.
struct RegionPool {
  std::vector<FeatureVector> regions;
  std::vector<RegionSource> sources;

  std::size_t size() const noexcept { return regions.size(); }
  bool empty() const noexcept { return regions.empty(); }
  void append(RegionPool other);
};

/// One averaged feature per group of `partition` over the grid's cells.
RegionPool pool_regions(const FeatureGrid& grid, const Partition& partition,
                        std::size_t image_index);

/// Regions per unlabeled grid when a total budget is split evenly.
std::size_t regions_per_grid(std::size_t total_regions, std::size_t n_grids);

}  // namespace partproto
