#pragma once

// Reference implementations used by the unit and acceptance tests. They
// are written from the defining formulas, deliberately simple, and share
// no code with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "partproto/episode.hpp"
#include "partproto/gradient.hpp"
#include "partproto/tensor.hpp"

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

template <typename A, typename B>
double dot(const A& a, const B& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

template <typename A>
double norm(const A& a) {
  return std::sqrt(dot(a, a));
}

template <typename A, typename B>
double cosine(const A& a, const B& b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na <= 1e-12 || nb <= 1e-12) return 0.0;
  return dot(a, b) / (na * nb);
}

template <typename A, typename B>
double clamped_cosine(const A& a, const B& b) {
  return std::max(0.0, cosine(a, b));
}

inline Vec to_vec(const std::vector<float>& v) { return {v.begin(), v.end()}; }

// Normalized attention row; uniform over the candidates when nothing is
// positive.
inline Vec attention_row(const Vec& sims) {
  double total = 0.0;
  for (double s : sims) total += s;
  Vec out(sims.size());
  for (std::size_t j = 0; j < sims.size(); ++j) {
    out[j] = total > 1e-8 ? sims[j] / total : 1.0 / static_cast<double>(sims.size());
  }
  return out;
}

// mu_ij over j != i, with a 0 on the diagonal.
template <typename V>
Mat context_weights(const std::vector<V>& protos) {
  const std::size_t n = protos.size();
  Mat mu(n, Vec(n, 0.0));
  if (n < 2) return mu;
  for (std::size_t i = 0; i < n; ++i) {
    Vec sims;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) sims.push_back(clamped_cosine(protos[i], protos[j]));
    }
    const Vec row = attention_row(sims);
    for (std::size_t j = 0, t = 0; j < n; ++j) {
      if (j != i) mu[i][j] = row[t++];
    }
  }
  return mu;
}

template <typename V, typename R>
Mat refinement_weights(const std::vector<V>& protos, const std::vector<R>& regions) {
  Mat phi;
  for (const auto& p : protos) {
    Vec sims;
    for (const auto& r : regions) sims.push_back(clamped_cosine(p, r));
    phi.push_back(regions.empty() ? Vec{} : attention_row(sims));
  }
  return phi;
}

// m_i = sum_{j != i} s_ij r_j / (sum_{j != i} s_ij + 1e-8).
template <typename R>
Mat neighbour_messages(const std::vector<R>& regions) {
  const std::size_t n = regions.size();
  const std::size_t dim = n ? regions.front().size() : 0;
  Mat out(n, Vec(dim, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    double z = 1e-8;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double s = clamped_cosine(regions[i], regions[j]);
      z += s;
      for (std::size_t d = 0; d < dim; ++d) out[i][d] += s * static_cast<double>(regions[j][d]);
    }
    for (double& v : out[i]) v /= z;
  }
  return out;
}

// Nearest source index for a center-aligned resize with round-half-down,
// in exact integer arithmetic: src = ((2i+1)*in - out) / (2*out), then
// ceil(src - 1/2) = ceil(((2i+1)*in - 2*out) / (2*out)).
inline std::size_t nearest_source(std::size_t i, std::size_t in, std::size_t out) {
  const long long num = static_cast<long long>((2 * i + 1) * in) - 2 * static_cast<long long>(out);
  const long long den = 2 * static_cast<long long>(out);
  long long q = num / den;
  if (num % den != 0 && num > 0) ++q;  // ceil for positive, truncation is ceil for negative
  return static_cast<std::size_t>(std::clamp<long long>(q, 0, static_cast<long long>(in) - 1));
}

// Align-corners bilinear sample of an h x w grid at output cell (y, x).
inline double bilinear(const std::vector<float>& v, std::size_t h, std::size_t w, std::size_t out_h,
                       std::size_t out_w, std::size_t y, std::size_t x) {
  const double sy = out_h > 1 ? static_cast<double>(y) * static_cast<double>(h - 1) / static_cast<double>(out_h - 1) : 0.0;
  const double sx = out_w > 1 ? static_cast<double>(x) * static_cast<double>(w - 1) / static_cast<double>(out_w - 1) : 0.0;
  const std::size_t y0 = std::min(static_cast<std::size_t>(sy), h - 1);
  const std::size_t x0 = std::min(static_cast<std::size_t>(sx), w - 1);
  const std::size_t y1 = std::min(y0 + 1, h - 1);
  const std::size_t x1 = std::min(x0 + 1, w - 1);
  const double fy = sy - static_cast<double>(y0);
  const double fx = sx - static_cast<double>(x0);
  const auto at = [&](std::size_t r, std::size_t c) { return static_cast<double>(v[r * w + c]); };
  return (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) + fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1));
}

// Exhaustive minimum SSE over every assignment of points to at most k
// groups.
template <typename P>
double optimal_sse(const std::vector<P>& points, std::size_t k) {
  const std::size_t n = points.size();
  const std::size_t dim = points.front().size();
  std::vector<std::size_t> label(n, 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    Mat sums(k, Vec(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t d = 0; d < dim; ++d) sums[label[i]][d] += points[i][d];
      ++counts[label[i]];
    }
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t d = 0; d < dim; ++d) {
        const double diff = points[i][d] - sums[label[i]][d] / static_cast<double>(counts[label[i]]);
        sse += diff * diff;
      }
    }
    best = std::min(best, sse);
    std::size_t pos = 0;
    while (pos < n && ++label[pos] == k) label[pos++] = 0;
    if (pos == n) break;
  }
  return best;
}

struct IouCounts {
  double iou_fg = 0.0;
  double iou_bg = 0.0;
};

// Pixel-counting IoU of one label value, ignoring 255 in either map.
inline double iou_of(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& gt,
                     const auto& is_class) {
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == 255 || gt[i] == 255) continue;
    const bool p = is_class(pred[i]);
    const bool g = is_class(gt[i]);
    inter += (p && g) ? 1 : 0;
    uni += (p || g) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline double class_iou(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& gt,
                        std::uint8_t c) {
  return iou_of(pred, gt, [c](std::uint8_t v) { return v == c; });
}

inline double binary_iou(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& gt) {
  const double fg = iou_of(pred, gt, [](std::uint8_t v) { return v != 0; });
  const double bg = iou_of(pred, gt, [](std::uint8_t v) { return v == 0; });
  return (fg + bg) / 2.0;
}

// -log softmax(t * scores)[label], computed without any shifting trick
// beyond the max.
inline double cross_entropy(const Vec& scores, std::size_t label, double t) {
  double peak = -std::numeric_limits<double>::infinity();
  for (double s : scores) peak = std::max(peak, t * s);
  double z = 0.0;
  for (double s : scores) z += std::exp(t * s - peak);
  return -(t * scores[label] - peak - std::log(z));
}

// On/off states of the piecewise-linear pieces of the refinement path:
// relu[k][j][d] for each region activation, clamp[k][i][j] for each
// prototype-region similarity, and whether each attention row had any
// positive similarity at all.
struct Gates {
  std::vector<std::vector<std::vector<bool>>> relu;
  std::vector<std::vector<std::vector<bool>>> clamp;
  std::vector<std::vector<bool>> attended;
};

namespace detail {

inline Mat augment(const partproto::FrozenClass& cls, const Mat& messages, const Vec& w, std::size_t dim,
                   std::vector<std::vector<bool>>* relu_out, const std::vector<std::vector<bool>>* relu_in) {
  Mat augmented;
  for (std::size_t j = 0; j < cls.regions.size(); ++j) {
    Vec r = cls.regions[j];
    std::vector<bool> on(dim);
    for (std::size_t a = 0; a < dim; ++a) {
      double act = 0.0;
      for (std::size_t b = 0; b < dim; ++b) act += w[a * dim + b] * messages[j][b];
      on[a] = relu_in ? (*relu_in)[j][a] : act > 0.0;
      if (on[a]) r[a] += act;
    }
    if (relu_out) relu_out->push_back(on);
    augmented.push_back(r);
  }
  return augmented;
}

}  // namespace detail

// Gate states of the forward pass at w.
inline Gates gates_at(const partproto::FrozenEpisode& ep, const Vec& w, std::size_t dim) {
  Gates g;
  for (const auto& cls : ep.classes) {
    auto& relu = g.relu.emplace_back();
    const Mat augmented = detail::augment(cls, neighbour_messages(cls.regions), w, dim, &relu, nullptr);
    auto& clamp = g.clamp.emplace_back();
    auto& attended = g.attended.emplace_back();
    for (const auto& p : cls.prototypes) {
      std::vector<bool> row;
      bool any = false;
      for (const auto& r : augmented) {
        row.push_back(cosine(p, r) > 0.0);
        any = any || row.back();
      }
      clamp.push_back(row);
      attended.push_back(any);
    }
  }
  return g;
}

// Episode loss of a frozen episode as a function of a double-precision
// message matrix. The max-pool winners and the gate states are supplied by
// the caller, so the function is smooth in w around the point they came
// from.
inline double frozen_loss(const partproto::FrozenEpisode& ep, const Vec& w, std::size_t dim,
                          const std::vector<std::vector<std::vector<std::uint32_t>>>& argmax,
                          const Gates& gates) {
  std::vector<Mat> refined;
  for (std::size_t k = 0; k < ep.classes.size(); ++k) {
    const auto& cls = ep.classes[k];
    const Mat augmented = detail::augment(cls, neighbour_messages(cls.regions), w, dim, nullptr, &gates.relu[k]);
    Mat protos;
    for (std::size_t i = 0; i < cls.prototypes.size(); ++i) {
      Vec sims;
      for (std::size_t j = 0; j < augmented.size(); ++j) {
        sims.push_back(gates.clamp[k][i][j] ? cosine(cls.prototypes[i], augmented[j]) : 0.0);
      }
      Vec phi(augmented.size(), augmented.empty() ? 0.0 : 1.0 / static_cast<double>(augmented.size()));
      if (gates.attended[k][i]) {
        double total = 0.0;
        for (double v : sims) total += v;
        for (std::size_t j = 0; j < sims.size(); ++j) phi[j] = sims[j] / total;
      }
      Vec p = cls.prototypes[i];
      for (std::size_t j = 0; j < augmented.size(); ++j) {
        for (std::size_t d = 0; d < dim; ++d) p[d] += ep.lambda_r * phi[j] * augmented[j][d];
      }
      protos.push_back(p);
    }
    refined.push_back(protos);
  }

  double total = 0.0;
  for (std::size_t img = 0; img < ep.images.size(); ++img) {
    const auto& image = ep.images[img];
    double sum = 0.0;
    std::size_t valid = 0;
    for (std::size_t cell = 0; cell < image.features.cell_count(); ++cell) {
      const std::uint8_t label = image.target.labels()[cell];
      if (label == partproto::kIgnoreLabel) continue;
      const auto f = image.features.cell(cell);
      Vec scores;
      for (std::size_t k = 0; k < refined.size(); ++k) {
        scores.push_back(cosine(f, refined[k][argmax[img][k][cell]]));
      }
      sum += cross_entropy(scores, label, ep.temperature);
      ++valid;
    }
    if (valid > 0) total += image.weight * sum / static_cast<double>(valid);
  }
  return total;
}

}  // namespace oracle
