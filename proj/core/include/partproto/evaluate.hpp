#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "partproto/episode.hpp"
#include "partproto/refine.hpp"

namespace partproto {

/// Produces the episode for (run, task); must be safe to call concurrently.
using EpisodeFactory =
    std::function<Episode(std::size_t run, std::size_t task, std::uint64_t task_seed)>;

/// Receives predicted masks (class identifiers, image resolution).
using PredictionSink = std::function<void(std::size_t run, std::size_t task,
                                          const std::vector<LabelGrid>& predictions)>;

struct EvalOptions {
  std::size_t runs = 5;
  std::size_t tasks = 1000;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  PredictionSink on_predictions;
};

struct RunMetrics {
  std::uint64_t seed = 0;
  double mean_iou = 0.0;
  double binary_iou = 0.0;
  std::size_t episodes = 0;
  /// Mean IoU of each class over the episodes that contain it.
  std::map<std::int32_t, double> per_class;
};

struct MetricsReport {
  std::vector<RunMetrics> runs;
  double mean_iou = 0.0;    // average of run means
  double binary_iou = 0.0;  // average of run means
  std::map<std::int32_t, double> per_class;
  std::size_t episodes = 0;
  HyperParams hyperparams;
};

/// Seed of run r: mix_seed(seed, r). Task t of that run receives
/// mix_seed(run_seed, t); its clustering is seeded from that value too.
std::uint64_t run_seed(std::uint64_t seed, std::size_t run);
std::uint64_t task_seed(std::uint64_t run_seed, std::size_t task);

/// Per-episode scores, exposed for tests and the ablation harness.
struct EpisodeScore {
  double mean_iou = 0.0;
  double binary_iou = 0.0;
  std::map<std::int32_t, double> per_class;
  std::vector<LabelGrid> predictions;
};

/// Runs the full pipeline on one episode and scores every query. Without
/// explicit weights the untrained default (0.1 * identity) is used.
EpisodeScore evaluate_episode(const Episode& episode, const HyperParams& params,
                              const std::optional<MessageWeights>& weights, std::uint64_t seed);

/// Episodic protocol: `runs` x `tasks` episodes, per-run averages and their
/// mean. Episodes may be processed on `jobs` threads; reduction is in task
/// order so the report does not depend on scheduling.
MetricsReport evaluate(const EpisodeFactory& factory, const HyperParams& params,
                       const std::optional<MessageWeights>& weights, const EvalOptions& options);

/// Stable JSON document with fields mean_iou, binary_iou, per_class, runs,
/// seeds, episodes and hyperparams.
std::string report_json(const MetricsReport& report);

/// The hyperparameters as a JSON object string.
std::string hyperparams_json(const HyperParams& params);

}  // namespace partproto
