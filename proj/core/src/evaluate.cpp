#include "partproto/evaluate.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "partproto/errors.hpp"
#include "partproto/metrics.hpp"
#include "partproto/pipeline.hpp"
#include "partproto/rng.hpp"

namespace partproto {

namespace {

nlohmann::json hyperparams_to_json(const HyperParams& p) {
  return {{"n_parts", p.n_parts},
          {"n_regions", p.n_regions},
          {"sigma", p.sigma},
          {"lambda_p", p.lambda_p},
          {"lambda_r", p.lambda_r},
          {"score_temperature", p.score_temperature},
          {"nonparametric_gnn", p.nonparametric_gnn},
          {"kmeans_max_iter", p.kmeans_max_iter},
          {"kmeans_tol", p.kmeans_tol},
          {"slic_compactness", p.slic_compactness},
          {"slic_iters", p.slic_iters}};
}

nlohmann::json per_class_to_json(const std::map<std::int32_t, double>& per_class) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [id, iou] : per_class) out[std::to_string(id)] = iou;
  return out;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first
// failure by index.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> workers;
  for (std::size_t t = 0; t < jobs; ++t) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

std::uint64_t run_seed(std::uint64_t seed, std::size_t run) { return mix_seed(seed, run); }
std::uint64_t task_seed(std::uint64_t run_seed, std::size_t task) { return mix_seed(run_seed, task); }

EpisodeScore evaluate_episode(const Episode& episode, const HyperParams& params,
                              const std::optional<MessageWeights>& weights, std::uint64_t seed) {
  const MessageWeights w = weights ? *weights : MessageWeights::scaled_identity(episode.channels());
  const EpisodePrototypes protos = build_episode_prototypes(episode, params, w, seed);

  EpisodeScore score;
  score.predictions = predict_queries(episode, protos);
  std::map<std::int32_t, std::pair<double, std::size_t>> class_sums;
  for (std::size_t j = 0; j < episode.queries.size(); ++j) {
    const LabelGrid gt = to_class_ids(episode.queries[j].mask, episode.class_list);
    const IouResult iou = mean_iou(score.predictions[j], gt, episode.class_list);
    score.mean_iou += iou.mean;
    score.binary_iou += binary_iou(score.predictions[j], gt);
    for (std::size_t c = 0; c < episode.class_list.size(); ++c) {
      auto& [sum, count] = class_sums[episode.class_list[c]];
      sum += iou.per_class[c];
      ++count;
    }
  }
  const auto n = static_cast<double>(episode.queries.size());
  score.mean_iou /= n;
  score.binary_iou /= n;
  for (const auto& [id, acc] : class_sums) {
    score.per_class[id] = acc.first / static_cast<double>(acc.second);
  }
  return score;
}

MetricsReport evaluate(const EpisodeFactory& factory, const HyperParams& params,
                       const std::optional<MessageWeights>& weights, const EvalOptions& options) {
  validate(params);
  if (options.runs == 0 || options.tasks == 0) {
    throw Error(ErrorKind::kInvalidConfig, "runs and tasks must be positive");
  }
  MetricsReport report;
  report.hyperparams = params;
  std::map<std::int32_t, std::pair<double, std::size_t>> overall_classes;
  std::mutex sink_mutex;

  for (std::size_t run = 0; run < options.runs; ++run) {
    RunMetrics metrics;
    metrics.seed = run_seed(options.seed, run);
    std::vector<EpisodeScore> scores(options.tasks);
    parallel_for(options.tasks, options.jobs, [&](std::size_t task) {
      const std::uint64_t seed = task_seed(metrics.seed, task);
      const Episode episode = factory(run, task, seed);
      scores[task] = evaluate_episode(episode, params, weights, mix_seed(seed, 1));
      if (options.on_predictions) {
        const std::lock_guard lock(sink_mutex);
        options.on_predictions(run, task, scores[task].predictions);
      }
      scores[task].predictions.clear();
    });

    std::map<std::int32_t, std::pair<double, std::size_t>> run_classes;
    for (const EpisodeScore& s : scores) {
      metrics.mean_iou += s.mean_iou;
      metrics.binary_iou += s.binary_iou;
      for (const auto& [id, iou] : s.per_class) {
        run_classes[id].first += iou;
        ++run_classes[id].second;
        overall_classes[id].first += iou;
        ++overall_classes[id].second;
      }
    }
    metrics.episodes = scores.size();
    metrics.mean_iou /= static_cast<double>(scores.size());
    metrics.binary_iou /= static_cast<double>(scores.size());
    for (const auto& [id, acc] : run_classes) {
      metrics.per_class[id] = acc.first / static_cast<double>(acc.second);
    }
    report.mean_iou += metrics.mean_iou;
    report.binary_iou += metrics.binary_iou;
    report.episodes += metrics.episodes;
    report.runs.push_back(std::move(metrics));
  }
  report.mean_iou /= static_cast<double>(options.runs);
  report.binary_iou /= static_cast<double>(options.runs);
  for (const auto& [id, acc] : overall_classes) {
    report.per_class[id] = acc.first / static_cast<double>(acc.second);
  }
  return report;
}

std::string report_json(const MetricsReport& report) {
  nlohmann::json runs = nlohmann::json::array();
  nlohmann::json seeds = nlohmann::json::array();
  for (std::size_t r = 0; r < report.runs.size(); ++r) {
    const RunMetrics& m = report.runs[r];
    runs.push_back({{"run", r},
                    {"seed", m.seed},
                    {"mean_iou", m.mean_iou},
                    {"binary_iou", m.binary_iou},
                    {"episodes", m.episodes},
                    {"per_class", per_class_to_json(m.per_class)}});
    seeds.push_back(m.seed);
  }
  const nlohmann::json doc = {{"mean_iou", report.mean_iou},
                              {"binary_iou", report.binary_iou},
                              {"per_class", per_class_to_json(report.per_class)},
                              {"runs", runs},
                              {"seeds", seeds},
                              {"episodes", report.episodes},
                              {"hyperparams", hyperparams_to_json(report.hyperparams)}};
  return doc.dump(2) + "\n";
}

std::string hyperparams_json(const HyperParams& params) {
  return hyperparams_to_json(params).dump(2);
}

}  // namespace partproto
