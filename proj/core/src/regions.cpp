#include <cmath>

#include "partproto/clustering.hpp"
#include "partproto/errors.hpp"

namespace partproto {

void RegionPool::append(RegionPool other) {
  for (auto& r : other.regions) regions.push_back(std::move(r));
  for (auto& s : other.sources) sources.push_back(std::move(s));
}

RegionPool pool_regions(const FeatureGrid& grid, const Partition& partition,
                        std::size_t image_index) {
  if (partition.assignments.size() != grid.cell_count()) {
    throw Error(ErrorKind::kDimensionMismatch, "pool_regions: partition does not cover the grid");
  }
  const std::size_t channels = grid.channels();
  std::vector<std::vector<double>> sums(partition.group_count, std::vector<double>(channels, 0.0));
  RegionPool pool;
  pool.sources.resize(partition.group_count, RegionSource{image_index, {}});
  for (std::size_t idx = 0; idx < partition.assignments.size(); ++idx) {
    const std::size_t g = partition.assignments[idx];
    if (g >= partition.group_count) {
      throw Error(ErrorKind::kDimensionMismatch, "pool_regions: group index out of range");
    }
    const auto f = grid.cell(idx);
    for (std::size_t ch = 0; ch < channels; ++ch) sums[g][ch] += f[ch];
    pool.sources[g].cells.push_back(idx);
  }
  pool.regions.reserve(partition.group_count);
  for (std::size_t g = 0; g < partition.group_count; ++g) {
    if (pool.sources[g].cells.empty()) {
      throw Error(ErrorKind::kDimensionMismatch, "pool_regions: partition has an empty group");
    }
    const double n = static_cast<double>(pool.sources[g].cells.size());
    FeatureVector mean(channels);
    for (std::size_t ch = 0; ch < channels; ++ch) mean[ch] = static_cast<float>(sums[g][ch] / n);
    pool.regions.push_back(std::move(mean));
  }
  return pool;
}

std::size_t regions_per_grid(std::size_t total_regions, std::size_t n_grids) {
  if (n_grids == 0) return 0;
  return (total_regions + n_grids - 1) / n_grids;
}

}  // namespace partproto
