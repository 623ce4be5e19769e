#include "partproto/train.hpp"

#include "partproto/errors.hpp"
#include "partproto/gradient.hpp"
#include "partproto/rng.hpp"

namespace partproto {

TrainResult train_message_weights(std::span<const Episode> episodes, MessageWeights initial,
                                  const HyperParams& params, const SgdOptions& options,
                                  std::uint64_t seed) {
  if (!(options.lr >= 0.0)) throw Error(ErrorKind::kInvalidConfig, "learning rate must be >= 0");
  if (options.momentum < 0.0 || options.weight_decay < 0.0) {
    throw Error(ErrorKind::kInvalidConfig, "momentum and weight decay must be >= 0");
  }
  if (initial.nonparametric || params.nonparametric_gnn) {
    throw Error(ErrorKind::kNonparametricMode, "nothing to train in nonparametric mode");
  }
  if (episodes.empty()) throw Error(ErrorKind::kEmptyInput, "no training episodes");

  std::vector<FrozenEpisode> frozen;
  frozen.reserve(episodes.size());
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    if (episodes[e].channels() != initial.dim) {
      throw Error(ErrorKind::kDimensionMismatch, "episode channels do not match the weight matrix");
    }
    frozen.push_back(freeze_episode(episodes[e], params, mix_seed(seed, e)));
  }

  TrainResult result{std::move(initial), {}};
  MessageWeights& w = result.weights;
  std::vector<double> velocity(w.matrix.size(), 0.0);
  for (std::size_t step = 0; step < options.steps; ++step) {
    const GradientResult g = message_weight_gradient(frozen[step % frozen.size()], w);
    result.loss_trace.push_back(g.loss.total);
    if (options.lr == 0.0) continue;
    for (std::size_t i = 0; i < w.matrix.size(); ++i) {
      const double grad = g.gradient[i] + options.weight_decay * static_cast<double>(w.matrix[i]);
      velocity[i] = options.momentum * velocity[i] + grad;
      w.matrix[i] = static_cast<float>(static_cast<double>(w.matrix[i]) - options.lr * velocity[i]);
    }
  }
  result.loss_trace.push_back(
      message_weight_gradient(frozen[options.steps % frozen.size()], w).loss.total);
  return result;
}

}  // namespace partproto
