#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "partproto/episode.hpp"
#include "partproto/refine.hpp"

namespace partproto {

struct SgdOptions {
  double lr = 1e-2;
  double momentum = 0.0;
  double weight_decay = 0.0;
  std::size_t steps = 0;
};

struct TrainResult {
  MessageWeights weights;
  /// Loss before each step plus the loss after the last one (steps + 1
  /// entries). Entry s is measured on the episode used at step s, the
  /// final entry on the episode the next step would use.
  std::vector<double> loss_trace;
};

/// SGD on the message weights only. Step s uses episode s mod N, whose
/// clustering is seeded with mix_seed(seed, s mod N) and frozen for the
/// whole run. lr == 0 leaves the weights bit-identical.
TrainResult train_message_weights(std::span<const Episode> episodes, MessageWeights initial,
                                  const HyperParams& params, const SgdOptions& options,
                                  std::uint64_t seed);

}  // namespace partproto
