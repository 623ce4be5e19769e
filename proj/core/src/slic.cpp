#include <algorithm>
#include <cmath>
#include <limits>

#include "partproto/clustering.hpp"
#include "distance.hpp"
#include "partproto/errors.hpp"

namespace partproto {

namespace {

struct Center {
  double row;
  double col;
  std::vector<double> feature;
};

// Places exactly n centers (n <= H * W): about sqrt(n * H / W) rows, with
// the centers split as evenly as possible between rows and spread evenly
// along each row.
std::vector<Center> lattice_centers(const FeatureGrid& grid, std::size_t n) {
  const double h = static_cast<double>(grid.height());
  const double w = static_cast<double>(grid.width());
  auto rows = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n) * h / w)));
  rows = std::clamp<std::size_t>(rows, 1, std::min(n, grid.height()));
  // Every row must fit its share of centers.
  while (rows < grid.height() && (n + rows - 1) / rows > grid.width()) ++rows;

  std::vector<Center> centers;
  centers.reserve(n);
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t in_row = (i + 1) * n / rows - i * n / rows;
    const double row = (static_cast<double>(i) + 0.5) * h / static_cast<double>(rows) - 0.5;
    for (std::size_t j = 0; j < in_row; ++j) {
      const double col = (static_cast<double>(j) + 0.5) * w / static_cast<double>(in_row) - 0.5;
      const auto r = static_cast<std::size_t>(std::clamp(std::floor(row + 0.5), 0.0, h - 1));
      const auto c = static_cast<std::size_t>(std::clamp(std::floor(col + 0.5), 0.0, w - 1));
      const auto cell = grid.cell(r, c);
      centers.push_back({row, col, {cell.begin(), cell.end()}});
    }
  }
  return centers;
}

double feature_distance(std::span<const float> f, const std::vector<double>& c) {
  return std::sqrt(detail::squared_distance(f.data(), c.data(), f.size()));
}

}  // namespace

Partition slic_feature_regions(const FeatureGrid& grid, std::size_t n_regions, double compactness,
                               std::size_t iters) {
  if (n_regions == 0) throw Error(ErrorKind::kInvalidArgument, "slic: n_regions must be positive");
  n_regions = std::min(n_regions, grid.cell_count());
  const std::size_t height = grid.height();
  const std::size_t width = grid.width();
  const double step = std::sqrt(static_cast<double>(height * width) / static_cast<double>(n_regions));
  const double spatial_weight = compactness / step;

  std::vector<Center> centers = lattice_centers(grid, n_regions);
  const std::size_t cells = grid.cell_count();
  std::vector<std::size_t> labels(cells, 0);
  std::vector<double> best(cells);
  const std::size_t channels = grid.channels();

  auto assign = [&] {
    std::fill(best.begin(), best.end(), std::numeric_limits<double>::infinity());
    // Each center only competes within a 2S x 2S window, as in image SLIC.
    const auto reach = static_cast<std::ptrdiff_t>(std::ceil(step));
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const Center& ctr = centers[k];
      const auto r0 = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::floor(ctr.row)) - reach);
      const auto r1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(height) - 1,
                                               static_cast<std::ptrdiff_t>(std::ceil(ctr.row)) + reach);
      const auto c0 = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::floor(ctr.col)) - reach);
      const auto c1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(width) - 1,
                                               static_cast<std::ptrdiff_t>(std::ceil(ctr.col)) + reach);
      for (auto r = r0; r <= r1; ++r) {
        for (auto c = c0; c <= c1; ++c) {
          const std::size_t idx = static_cast<std::size_t>(r) * width + static_cast<std::size_t>(c);
          const double dr = static_cast<double>(r) - ctr.row;
          const double dc = static_cast<double>(c) - ctr.col;
          const double d = feature_distance(grid.cell(idx), ctr.feature) +
                           spatial_weight * std::sqrt(dr * dr + dc * dc);
          if (d < best[idx]) {
            best[idx] = d;
            labels[idx] = k;
          }
        }
      }
    }
    // Cells outside every window fall back to a full search.
    for (std::size_t idx = 0; idx < cells; ++idx) {
      if (std::isfinite(best[idx])) continue;
      const double r = static_cast<double>(idx / width);
      const double c = static_cast<double>(idx % width);
      for (std::size_t k = 0; k < centers.size(); ++k) {
        const double dr = r - centers[k].row;
        const double dc = c - centers[k].col;
        const double d = feature_distance(grid.cell(idx), centers[k].feature) +
                         spatial_weight * std::sqrt(dr * dr + dc * dc);
        if (d < best[idx]) {
          best[idx] = d;
          labels[idx] = k;
        }
      }
    }
  };

  auto update = [&] {
    std::vector<double> rows(centers.size(), 0.0);
    std::vector<double> cols(centers.size(), 0.0);
    std::vector<std::vector<double>> sums(centers.size(), std::vector<double>(channels, 0.0));
    std::vector<std::size_t> counts(centers.size(), 0);
    for (std::size_t idx = 0; idx < cells; ++idx) {
      const std::size_t k = labels[idx];
      rows[k] += static_cast<double>(idx / width);
      cols[k] += static_cast<double>(idx % width);
      const auto f = grid.cell(idx);
      for (std::size_t ch = 0; ch < channels; ++ch) sums[k][ch] += f[ch];
      ++counts[k];
    }
    for (std::size_t k = 0; k < centers.size(); ++k) {
      if (counts[k] == 0) continue;  // empty centers keep their last position
      const double n = static_cast<double>(counts[k]);
      centers[k].row = rows[k] / n;
      centers[k].col = cols[k] / n;
      for (std::size_t ch = 0; ch < channels; ++ch) centers[k].feature[ch] = sums[k][ch] / n;
    }
  };

  assign();
  for (std::size_t it = 0; it < iters; ++it) {
    update();
    assign();
  }

  std::vector<std::size_t> remap(centers.size(), centers.size());
  Partition partition;
  partition.assignments.resize(cells);
  for (std::size_t idx = 0; idx < cells; ++idx) {
    std::size_t& slot = remap[labels[idx]];
    if (slot == centers.size()) slot = partition.group_count++;
    partition.assignments[idx] = slot;
  }
  return partition;
}

}  // namespace partproto
