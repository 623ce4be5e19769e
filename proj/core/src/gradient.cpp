#include "partproto/gradient.hpp"

#include <cmath>
#include <string>

#include "partproto/errors.hpp"
#include "partproto/pipeline.hpp"

namespace partproto {

namespace {

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

Vec to_vec(std::span<const float> v) { return {v.begin(), v.end()}; }

// d cos(a, b) / d b = a / (|a||b|) - cos * b / |b|^2, scaled by `scale` and
// accumulated into `out`.
void add_cosine_grad_wrt_b(const Vec& a, double na, const Vec& b, double nb, double cos,
                           double scale, Vec& out) {
  const double inv_ab = 1.0 / (na * nb);
  const double inv_bb = 1.0 / (nb * nb);
  for (std::size_t d = 0; d < b.size(); ++d) {
    out[d] += scale * (a[d] * inv_ab - cos * b[d] * inv_bb);
  }
}

// Forward quantities of one class that the backward pass reuses.
struct ClassForward {
  std::vector<Vec> activation;  // a_j = W m_j
  std::vector<Vec> augmented;   // r~_j
  std::vector<double> augmented_norm;
  std::vector<Vec> cos;         // cos(p_i, r~_j), unclamped
  std::vector<Vec> phi;
  std::vector<double> phi_total;  // sum_j max(cos_ij, 0); <= eps means uniform
  std::vector<Vec> refined;     // p^r_i
  std::vector<double> refined_norm;
  std::vector<double> proto_norm;
};

ClassForward forward_class(const FrozenClass& cls, const std::vector<double>& w, std::size_t dim,
                           double lambda_r) {
  ClassForward fw;
  const std::size_t n_regions = cls.regions.size();
  for (std::size_t j = 0; j < n_regions; ++j) {
    Vec a(dim, 0.0);
    for (std::size_t r = 0; r < dim; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < dim; ++c) s += w[r * dim + c] * cls.messages[j][c];
      a[r] = s;
    }
    Vec rt = cls.regions[j];
    for (std::size_t d = 0; d < dim; ++d) {
      if (a[d] > 0.0) rt[d] += a[d];
    }
    fw.augmented_norm.push_back(norm(rt));
    fw.activation.push_back(std::move(a));
    fw.augmented.push_back(std::move(rt));
  }
  for (const Vec& p : cls.prototypes) {
    const double np = norm(p);
    fw.proto_norm.push_back(np);
    Vec cos(n_regions, 0.0);
    Vec clamped(n_regions, 0.0);
    double total = 0.0;
    for (std::size_t j = 0; j < n_regions; ++j) {
      if (np > kMinNorm && fw.augmented_norm[j] > kMinNorm) {
        cos[j] = dot(p, fw.augmented[j]) / (np * fw.augmented_norm[j]);
      }
      clamped[j] = std::max(cos[j], 0.0);
      total += clamped[j];
    }
    Vec phi(n_regions, n_regions ? 1.0 / static_cast<double>(n_regions) : 0.0);
    if (total > kAttentionEps) {
      for (std::size_t j = 0; j < n_regions; ++j) phi[j] = clamped[j] / total;
    }
    Vec refined = p;
    for (std::size_t j = 0; j < n_regions; ++j) {
      for (std::size_t d = 0; d < dim; ++d) refined[d] += lambda_r * phi[j] * fw.augmented[j][d];
    }
    fw.refined_norm.push_back(norm(refined));
    fw.refined.push_back(std::move(refined));
    fw.cos.push_back(std::move(cos));
    fw.phi.push_back(std::move(phi));
    fw.phi_total.push_back(total);
  }
  return fw;
}

}  // namespace

FrozenEpisode freeze_episode(const Episode& episode, const HyperParams& params, std::uint64_t seed) {
  validate(params);
  const std::size_t dim = episode.channels();
  // W never influences clustering or selection; identity stands in for it.
  const EpisodePrototypes protos =
      build_episode_prototypes(episode, params, MessageWeights::scaled_identity(dim), seed);

  FrozenEpisode frozen;
  frozen.temperature = params.score_temperature;
  frozen.lambda_r = params.lambda_r;
  for (std::size_t l = 0; l < protos.contextual.size(); ++l) {
    FrozenClass cls;
    for (const auto& p : protos.contextual[l].prototypes) cls.prototypes.push_back(to_vec(p));
    for (const auto& r : protos.selected[l].regions) cls.regions.push_back(to_vec(r));
    cls.messages = neighbour_messages(protos.selected[l].regions);
    frozen.classes.push_back(std::move(cls));
  }

  const auto masks = support_masks_at_feature_resolution(episode);
  const double shot_weight =
      1.0 / static_cast<double>(episode.n_way() * std::max<std::size_t>(1, episode.k_shot()));
  for (std::size_t c = 0; c < episode.support.size(); ++c) {
    for (std::size_t k = 0; k < episode.support[c].size(); ++k) {
      frozen.images.push_back({episode.support[c][k].features, masks[c][k], shot_weight, false});
    }
  }
  const double query_weight = 1.0 / static_cast<double>(episode.queries.size());
  for (const LabeledGrid& q : episode.queries) {
    frozen.images.push_back(
        {q.features, resize_mask_nearest(q.mask, q.features.height(), q.features.width()),
         query_weight, true});
  }
  return frozen;
}

GradientResult message_weight_gradient(const FrozenEpisode& frozen, const MessageWeights& weights) {
  if (weights.nonparametric) {
    throw Error(ErrorKind::kNonparametricMode, "message weights are disabled in nonparametric mode");
  }
  const std::size_t dim = weights.dim;
  if (weights.matrix.size() != dim * dim) {
    throw Error(ErrorKind::kDimensionMismatch, "message weights are not square");
  }
  const std::vector<double> w(weights.matrix.begin(), weights.matrix.end());
  const std::size_t n_classes = frozen.classes.size();

  std::vector<ClassForward> forward;
  forward.reserve(n_classes);
  for (const FrozenClass& cls : frozen.classes) {
    if (!cls.prototypes.empty() && cls.prototypes.front().size() != dim) {
      throw Error(ErrorKind::kDimensionMismatch,
                  "weights are " + std::to_string(dim) + "-dimensional, features are " +
                      std::to_string(cls.prototypes.front().size()));
    }
    forward.push_back(forward_class(cls, w, dim, frozen.lambda_r));
  }

  GradientResult result;
  result.dim = dim;
  result.gradient.assign(dim * dim, 0.0);

  // dL/dp^r for every class and part.
  std::vector<std::vector<Vec>> proto_grad(n_classes);
  for (std::size_t k = 0; k < n_classes; ++k) {
    proto_grad[k].assign(forward[k].refined.size(), Vec(dim, 0.0));
  }

  std::vector<double> fused(n_classes);
  std::vector<std::uint32_t> winner(n_classes);
  std::vector<double> best_cos(n_classes);
  for (const FrozenImage& image : frozen.images) {
    auto& argmax = result.argmax.emplace_back(
        n_classes, std::vector<std::uint32_t>(image.features.cell_count(), 0));
    const auto labels = image.target.labels();
    std::size_t valid = 0;
    for (std::uint8_t l : labels) valid += l != kIgnoreLabel ? 1 : 0;
    double image_loss = 0.0;

    for (std::size_t idx = 0; idx < image.features.cell_count(); ++idx) {
      const Vec f = to_vec(image.features.cell(idx));
      const double nf = norm(f);
      if (nf <= kMinNorm) throw Error(ErrorKind::kZeroNormVector, "zero-norm feature cell");
      for (std::size_t k = 0; k < n_classes; ++k) {
        const ClassForward& fw = forward[k];
        std::uint32_t best = 0;
        double best_score = -INFINITY;
        for (std::size_t i = 0; i < fw.refined.size(); ++i) {
          const double s = dot(f, fw.refined[i]) / (nf * fw.refined_norm[i]);
          if (s > best_score) {
            best_score = s;
            best = static_cast<std::uint32_t>(i);
          }
        }
        argmax[k][idx] = best;
        winner[k] = best;
        fused[k] = best_score;
        best_cos[k] = best_score;
      }
      if (labels[idx] == kIgnoreLabel) continue;

      const double t = frozen.temperature;
      double peak = -INFINITY;
      for (double s : fused) peak = std::max(peak, t * s);
      double z = 0.0;
      for (double s : fused) z += std::exp(t * s - peak);
      image_loss += peak + std::log(z) - t * fused[labels[idx]];

      const double cell_scale = image.weight / static_cast<double>(valid);
      for (std::size_t k = 0; k < n_classes; ++k) {
        const double prob = std::exp(t * fused[k] - peak) / z;
        const double d_score = cell_scale * t * (prob - (k == labels[idx] ? 1.0 : 0.0));
        const std::size_t i = winner[k];
        add_cosine_grad_wrt_b(f, nf, forward[k].refined[i], forward[k].refined_norm[i], best_cos[k],
                              d_score, proto_grad[k][i]);
      }
    }
    if (valid > 0) image_loss /= static_cast<double>(valid);
    if (image.is_query) {
      result.loss.query_ce += image.weight * image_loss;
    } else {
      result.loss.support_ce += image.weight * image_loss;
    }
  }
  result.loss.total = result.loss.query_ce + result.loss.support_ce;

  // Back through refinement and message passing into W.
  for (std::size_t k = 0; k < n_classes; ++k) {
    const FrozenClass& cls = frozen.classes[k];
    const ClassForward& fw = forward[k];
    const std::size_t n_regions = cls.regions.size();
    if (n_regions == 0 || frozen.lambda_r == 0.0) continue;

    std::vector<Vec> region_grad(n_regions, Vec(dim, 0.0));
    for (std::size_t i = 0; i < fw.refined.size(); ++i) {
      Vec u = proto_grad[k][i];
      for (double& v : u) v *= frozen.lambda_r;
      // Direct path: p^r_i depends linearly on r~_j through phi_ij.
      for (std::size_t j = 0; j < n_regions; ++j) {
        for (std::size_t d = 0; d < dim; ++d) region_grad[j][d] += fw.phi[i][j] * u[d];
      }
      if (fw.phi_total[i] <= kAttentionEps) continue;  // uniform weights are constant
      // Attention path: phi_ij = c_ij / sum_l c_il with c = max(cos, 0).
      Vec q(n_regions);
      double mean_q = 0.0;
      for (std::size_t j = 0; j < n_regions; ++j) {
        q[j] = dot(u, fw.augmented[j]);
        mean_q += fw.phi[i][j] * q[j];
      }
      for (std::size_t j = 0; j < n_regions; ++j) {
        if (fw.cos[i][j] <= 0.0) continue;
        const double d_c = (q[j] - mean_q) / fw.phi_total[i];
        add_cosine_grad_wrt_b(cls.prototypes[i], fw.proto_norm[i], fw.augmented[j],
                              fw.augmented_norm[j], fw.cos[i][j], d_c, region_grad[j]);
      }
    }
    for (std::size_t j = 0; j < n_regions; ++j) {
      for (std::size_t r = 0; r < dim; ++r) {
        if (fw.activation[j][r] <= 0.0) continue;
        const double g = region_grad[j][r];
        double* row = result.gradient.data() + r * dim;
        for (std::size_t c = 0; c < dim; ++c) row[c] += g * cls.messages[j][c];
      }
    }
  }
  return result;
}

GradientResult approx_gradient_message_weights(const Episode& episode, const MessageWeights& weights,
                                               const HyperParams& params, std::uint64_t seed) {
  if (weights.nonparametric || params.nonparametric_gnn) {
    throw Error(ErrorKind::kNonparametricMode, "message weights are disabled in nonparametric mode");
  }
  if (weights.dim != episode.channels()) {
    throw Error(ErrorKind::kDimensionMismatch, "message weight size does not match feature channels");
  }
  return message_weight_gradient(freeze_episode(episode, params, seed), weights);
}

}  // namespace partproto
