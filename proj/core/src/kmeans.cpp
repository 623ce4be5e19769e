#include "partproto/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "distance.hpp"
#include "partproto/errors.hpp"
#include "partproto/rng.hpp"

namespace partproto {

namespace {

constexpr double kCollapseDistance = 1e-9;

// Points copied once into one contiguous double buffer.
class PointMatrix {
 public:
  explicit PointMatrix(std::span<const FeatureVector> points)
      : n_(points.size()), dim_(points.front().size()) {
    data_.reserve(n_ * dim_);
    for (const auto& p : points) data_.insert(data_.end(), p.begin(), p.end());
  }
  std::size_t size() const { return n_; }
  std::span<const double> operator[](std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  std::span<const double> front() const { return (*this)[0]; }

 private:
  std::size_t n_;
  std::size_t dim_;
  std::vector<double> data_;
};

double sq_dist(std::span<const double> p, const std::vector<double>& c) {
  return detail::squared_distance(p.data(), c.data(), p.size());
}

double sq_dist(std::span<const float> p, const std::vector<double>& c) {
  return detail::squared_distance(p.data(), c.data(), p.size());
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  return detail::squared_distance(a.data(), b.data(), a.size());
}

std::vector<double> as_double(std::span<const double> p) { return {p.begin(), p.end()}; }

// Greedy k-means++: each new center is the best of several D^2-sampled
// candidates. Stops early when every point already coincides with a center.
std::vector<std::vector<double>> seed_centers(const PointMatrix& points,
                                              std::size_t k, Rng& rng) {
  const std::size_t n = points.size();
  std::vector<std::vector<double>> centers;
  centers.push_back(as_double(points[rng.index(n)]));
  std::vector<double> closest(n);
  for (std::size_t i = 0; i < n; ++i) closest[i] = sq_dist(points[i], centers[0]);

  const std::size_t trials = 2 + static_cast<std::size_t>(std::log(static_cast<double>(k)));
  while (centers.size() < k) {
    double total = 0.0;
    for (double d : closest) total += d;
    if (total <= 0.0) break;

    std::size_t best = n;
    double best_potential = std::numeric_limits<double>::infinity();
    std::vector<double> best_closest;
    for (std::size_t t = 0; t < trials; ++t) {
      const double target = rng.uniform() * total;
      double cumulative = 0.0;
      std::size_t pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        cumulative += closest[i];
        if (cumulative > target) {
          pick = i;
          break;
        }
      }
      while (closest[pick] <= 0.0 && pick > 0) --pick;  // guard against rounding at the tail
      const auto candidate = as_double(points[pick]);
      std::vector<double> trial_closest(n);
      double potential = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        trial_closest[i] = std::min(closest[i], sq_dist(points[i], candidate));
        potential += trial_closest[i];
      }
      if (potential < best_potential) {
        best_potential = potential;
        best = pick;
        best_closest = std::move(trial_closest);
      }
    }
    if (best == n || closest[best] <= 0.0) break;
    centers.push_back(as_double(points[best]));
    closest = std::move(best_closest);
  }
  return centers;
}

struct LloydState {
  std::vector<std::vector<double>> centers;
  std::vector<std::size_t> assignments;
  std::vector<double> distances;
  double sse = 0.0;
  std::vector<double> trace;
};

bool assign(const PointMatrix& points, LloydState& s) {
  bool changed = false;
  s.sse = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::size_t best = 0;
    double best_d = sq_dist(points[i], s.centers[0]);
    for (std::size_t c = 1; c < s.centers.size(); ++c) {
      const double d = sq_dist(points[i], s.centers[c]);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    if (s.assignments[i] != best) changed = true;
    s.assignments[i] = best;
    s.distances[i] = best_d;
    s.sse += best_d;
  }
  return changed;
}

// Recomputes centers as member means. Returns false when the center set had
// to change shape (empty or collapsed groups), which forces another pass.
bool update(const PointMatrix& points, LloydState& s) {
  const std::size_t dim = points.front().size();
  const std::size_t k = s.centers.size();
  std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto& sum = sums[s.assignments[i]];
    for (std::size_t d = 0; d < dim; ++d) sum[d] += points[i][d];
    ++counts[s.assignments[i]];
  }

  bool stable = true;
  std::vector<std::vector<double>> next;
  std::vector<std::size_t> remap(k, k);
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) {
      stable = false;
      continue;
    }
    for (double& v : sums[c]) v /= static_cast<double>(counts[c]);
    bool collapsed = false;
    for (const auto& kept : next) {
      if (std::sqrt(sq_dist(kept, sums[c])) <= kCollapseDistance) {
        collapsed = true;
        break;
      }
    }
    if (collapsed) {
      stable = false;
      continue;
    }
    remap[c] = next.size();
    next.push_back(std::move(sums[c]));
  }

  // Re-seed dropped groups from the farthest points, while any point is
  // still away from every center.
  const std::size_t lost = k - next.size();
  std::vector<bool> used(points.size(), false);
  for (std::size_t r = 0; r < lost; ++r) {
    std::size_t far = points.size();
    double far_d = kCollapseDistance * kCollapseDistance;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (used[i]) continue;
      double d = std::numeric_limits<double>::infinity();
      for (const auto& c : next) d = std::min(d, sq_dist(points[i], c));
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    if (far == points.size()) break;
    used[far] = true;
    next.push_back(as_double(points[far]));
  }
  for (auto& a : s.assignments) a = remap[a] < k ? remap[a] : 0;
  s.centers = std::move(next);
  return stable;
}

KMeansResult run_once(const PointMatrix& points, std::size_t k, std::uint64_t seed,
                      const KMeansOptions& options) {
  Rng rng(seed);
  LloydState s;
  s.centers = seed_centers(points, k, rng);
  s.assignments.assign(points.size(), std::numeric_limits<std::size_t>::max());
  s.distances.assign(points.size(), 0.0);

  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
    const bool changed = assign(points, s);
    s.trace.push_back(s.sse);
    if (!changed && iter > 0) break;
    if (std::isfinite(previous) && previous - s.sse <= options.tol * previous) break;
    previous = s.sse;
    const bool stable = update(points, s);
    if (!stable) {
      // Force a full reassignment against the reshaped center set.
      std::fill(s.assignments.begin(), s.assignments.end(), std::numeric_limits<std::size_t>::max());
    }
  }

  // Compact to non-empty groups in center order and report member means.
  KMeansResult result;
  std::vector<std::size_t> counts(s.centers.size(), 0);
  for (std::size_t a : s.assignments) ++counts[a];
  std::vector<std::size_t> remap(s.centers.size(), 0);
  std::size_t groups = 0;
  for (std::size_t c = 0; c < s.centers.size(); ++c) {
    if (counts[c] > 0) remap[c] = groups++;
  }
  result.partition.group_count = groups;
  result.partition.assignments.reserve(points.size());
  for (std::size_t a : s.assignments) result.partition.assignments.push_back(remap[a]);

  const std::size_t dim = points.front().size();
  result.centroids.assign(groups, std::vector<double>(dim, 0.0));
  std::vector<std::size_t> members(groups, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const std::size_t g = result.partition.assignments[i];
    for (std::size_t d = 0; d < dim; ++d) result.centroids[g][d] += points[i][d];
    ++members[g];
  }
  for (std::size_t g = 0; g < groups; ++g) {
    for (double& v : result.centroids[g]) v /= static_cast<double>(members[g]);
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    result.sse += sq_dist(points[i], result.centroids[result.partition.assignments[i]]);
  }
  result.sse_trace = std::move(s.trace);
  return result;
}

}  // namespace

KMeansResult kmeans(std::span<const FeatureVector> points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options) {
  if (points.empty()) throw Error(ErrorKind::kEmptyInput, "kmeans: no points");
  if (k == 0) throw Error(ErrorKind::kInvalidArgument, "kmeans: k must be positive");
  const std::size_t dim = points.front().size();
  for (const auto& p : points) {
    if (p.size() != dim) throw Error(ErrorKind::kDimensionMismatch, "kmeans: ragged points");
  }
  k = std::min(k, points.size());

  KMeansResult best;
  bool have_best = false;
  const std::size_t inits = std::max<std::size_t>(1, options.n_init);
  const PointMatrix matrix(points);
  for (std::size_t init = 0; init < inits; ++init) {
    KMeansResult candidate = run_once(matrix, k, mix_seed(seed, init), options);
    if (!have_best || candidate.sse < best.sse) {
      best = std::move(candidate);
      have_best = true;
    }
  }
  return best;
}

double partition_sse(std::span<const FeatureVector> points, const Partition& partition) {
  if (points.empty()) return 0.0;
  const std::size_t dim = points.front().size();
  std::vector<std::vector<double>> means(partition.group_count, std::vector<double>(dim, 0.0));
  std::vector<std::size_t> counts(partition.group_count, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const std::size_t g = partition.assignments[i];
    for (std::size_t d = 0; d < dim; ++d) means[g][d] += points[i][d];
    ++counts[g];
  }
  for (std::size_t g = 0; g < partition.group_count; ++g) {
    if (counts[g] == 0) continue;
    for (double& v : means[g]) v /= static_cast<double>(counts[g]);
  }
  double sse = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    sse += sq_dist(points[i], means[partition.assignments[i]]);
  }
  return sse;
}

}  // namespace partproto
