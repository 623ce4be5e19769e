// partproto: episodic evaluation, training, synthesis and ablation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "partproto/episode_archive.hpp"
#include "partproto/errors.hpp"
#include "partproto/evaluate.hpp"
#include "partproto/refine.hpp"
#include "partproto/rng.hpp"
#include "partproto/sampler.hpp"
#include "partproto/synth.hpp"
#include "partproto/train.hpp"

namespace fs = std::filesystem;
using namespace partproto;

namespace {

struct RunConfig {
  HyperParams params;
  EpisodeShape shape;
  SynthConfig synth;
  std::size_t runs = 5;
  std::size_t tasks = 1000;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::string weights_path;
  std::string out_path;

  // eval / train data source
  bool use_synth = false;
  std::string episodes_dir;
  bool sample = false;
  std::vector<std::int32_t> fold_classes;
  std::string predictions_dir;

  // train
  double lr = 5e-4;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::size_t steps = 50;
  std::size_t train_episodes = 8;
  std::string report_path;
};

void add_model_options(CLI::App& cmd, RunConfig& cfg) {
  HyperParams& p = cfg.params;
  cmd.add_option("--n-parts", p.n_parts, "Part prototypes per class");
  cmd.add_option("--n-regions", p.n_regions, "Candidate regions shared by the unlabeled grids");
  cmd.add_option("--sigma", p.sigma, "Region relevance threshold");
  cmd.add_option("--lambda-p", p.lambda_p, "Class-context scale");
  cmd.add_option("--lambda-r", p.lambda_r, "Region refinement scale");
  cmd.add_option("--temperature", p.score_temperature, "Softmax scale applied to cosine scores");
  cmd.add_flag("--nonparametric-gnn", p.nonparametric_gnn, "Pass region messages without the weight matrix");
  cmd.add_option("--kmeans-max-iter", p.kmeans_max_iter, "K-means iteration cap");
  cmd.add_option("--kmeans-tol", p.kmeans_tol, "K-means relative SSE tolerance");
  cmd.add_option("--slic-compactness", p.slic_compactness, "SLIC spatial weight");
  cmd.add_option("--slic-iters", p.slic_iters, "SLIC iterations");
  cmd.add_option("--weights", cfg.weights_path, "Message weight archive (default: 0.1 * identity)");
}

void add_episode_options(CLI::App& cmd, RunConfig& cfg) {
  cmd.add_option("--n-way", cfg.shape.n_way, "Classes per episode");
  cmd.add_option("--k-shot", cfg.shape.k_shot, "Labeled supports per class");
  cmd.add_option("--n-unlabeled", cfg.shape.n_unlabeled, "Unlabeled support grids");
  cmd.add_option("--n-query", cfg.shape.n_query, "Queries per class");
  cmd.add_option("--seed", cfg.seed, "Base seed");
}

void add_synth_options(CLI::App& cmd, RunConfig& cfg) {
  SynthConfig& s = cfg.synth;
  cmd.add_option("--grid", s.grid_height, "Synthetic grid side in cells");
  cmd.add_option("--channels", s.channels, "Synthetic feature channels");
  cmd.add_option("--stride", s.image_stride, "Image pixels per cell along each axis");
  cmd.add_option("--jitter", s.jitter, "Intra-class feature standard deviation");
  cmd.add_option("--instance-share", s.instance_share, "Fraction of jitter variance shared per instance");
  cmd.add_option("--separation", s.separation, "Norm of every class mean");
  cmd.add_option("--class-pool", s.class_pool, "Synthetic class identifiers 1..N");
  cmd.add_option("--world-seed", s.world_seed, "Seed of the class means");
}

void add_run_options(CLI::App& cmd, RunConfig& cfg) {
  cmd.add_option("--runs", cfg.runs, "Evaluation runs");
  cmd.add_option("--tasks", cfg.tasks, "Episodes per run");
  cmd.add_option("--jobs", cfg.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

void add_source_options(CLI::App& cmd, RunConfig& cfg) {
  cmd.add_flag("--synth", cfg.use_synth, "Use synthetic episodes");
  cmd.add_option("--episodes-dir", cfg.episodes_dir, "Directory of episode archives");
  cmd.add_flag("--sample", cfg.sample, "Sample fresh episodes from the directory's labeled images");
  cmd.add_option("--fold-classes", cfg.fold_classes, "Class identifiers available to the sampler");
}

SynthConfig synth_for(const RunConfig& cfg) {
  SynthConfig s = cfg.synth;
  s.grid_width = s.grid_height;
  s.n_way = cfg.shape.n_way;
  s.k_shot = cfg.shape.k_shot;
  s.n_unlabeled = cfg.shape.n_unlabeled;
  s.n_query = cfg.shape.n_query;
  return s;
}

void validate_shape(const EpisodeShape& shape) {
  if (shape.n_way == 0 || shape.k_shot == 0 || shape.n_query == 0) {
    throw Error(ErrorKind::kInvalidConfig, "n-way, k-shot and n-query must be positive");
  }
}

std::optional<MessageWeights> load_weights(const RunConfig& cfg) {
  if (cfg.weights_path.empty()) return std::nullopt;
  return read_weights_archive(cfg.weights_path);
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  std::ofstream out(target, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorKind::kIoError, "cannot write " + path);
}

// Chooses synthetic, fixed-archive or sampled episodes. Fixed archives set
// the task count to the number of archives.
EpisodeFactory make_factory(const RunConfig& cfg, std::size_t& tasks) {
  if (cfg.use_synth == !cfg.episodes_dir.empty()) {
    throw Error(ErrorKind::kInvalidConfig, "exactly one of --synth or --episodes-dir is required");
  }
  if (cfg.use_synth) {
    const SynthConfig base = synth_for(cfg);
    validate(base);
    return [base](std::size_t, std::size_t, std::uint64_t seed) {
      SynthConfig c = base;
      c.seed = seed;
      return generate_synthetic_episode(c);
    };
  }
  if (cfg.sample) {
    auto pool = std::make_shared<const ImagePool>(ImagePool::from_directory(cfg.episodes_dir));
    const auto fold = cfg.fold_classes;
    const EpisodeShape shape = cfg.shape;
    return [pool, fold, shape](std::size_t, std::size_t, std::uint64_t seed) {
      return sample_episode(*pool, fold, shape, seed);
    };
  }
  auto files = std::make_shared<const std::vector<fs::path>>(list_episode_archives(cfg.episodes_dir));
  tasks = files->size();
  return [files](std::size_t, std::size_t task, std::uint64_t) {
    return read_episode_archive((*files)[task]);
  };
}

int run_eval(const RunConfig& cfg) {
  validate(cfg.params);
  validate_shape(cfg.shape);
  std::size_t tasks = cfg.tasks;
  const EpisodeFactory factory = make_factory(cfg, tasks);
  const auto weights = load_weights(cfg);

  EvalOptions options;
  options.runs = cfg.runs;
  options.tasks = tasks;
  options.seed = cfg.seed;
  options.jobs = cfg.jobs;
  if (!cfg.predictions_dir.empty()) {
    const fs::path dir(cfg.predictions_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::kIoError, "cannot create " + dir.string());
    options.on_predictions = [dir](std::size_t run, std::size_t task,
                                   const std::vector<LabelGrid>& predictions) {
      for (std::size_t q = 0; q < predictions.size(); ++q) {
        char name[64];
        std::snprintf(name, sizeof name, "pred_r%zu_t%05zu_q%zu.npz", run, task, q);
        write_mask_archive(predictions[q], dir / name);
      }
    };
  }
  const MetricsReport report = evaluate(factory, cfg.params, weights, options);
  write_text(cfg.out_path, report_json(report));
  return 0;
}

int run_train(const RunConfig& cfg) {
  validate(cfg.params);
  validate_shape(cfg.shape);
  if (cfg.out_path.empty()) throw Error(ErrorKind::kInvalidConfig, "train requires --out");
  if (!(cfg.lr >= 0.0)) throw Error(ErrorKind::kInvalidConfig, "lr must be >= 0");
  if (cfg.train_episodes == 0) throw Error(ErrorKind::kInvalidConfig, "--train-episodes must be positive");
  if (cfg.params.nonparametric_gnn) {
    throw Error(ErrorKind::kNonparametricMode, "nonparametric mode has no weights to train");
  }

  std::size_t tasks = cfg.train_episodes;
  const EpisodeFactory factory = make_factory(cfg, tasks);
  tasks = std::min(tasks, cfg.train_episodes);
  std::vector<Episode> episodes;
  const std::uint64_t base = run_seed(cfg.seed, 0);
  for (std::size_t t = 0; t < tasks; ++t) episodes.push_back(factory(0, t, task_seed(base, t)));

  MessageWeights initial = cfg.weights_path.empty()
                               ? MessageWeights::scaled_identity(episodes.front().channels())
                               : read_weights_archive(cfg.weights_path);
  SgdOptions sgd;
  sgd.lr = cfg.lr;
  sgd.momentum = cfg.momentum;
  sgd.weight_decay = cfg.weight_decay;
  sgd.steps = cfg.steps;
  const TrainResult result = train_message_weights(episodes, std::move(initial), cfg.params, sgd, cfg.seed);
  write_weights_archive(result.weights, cfg.out_path);

  const nlohmann::json report = {{"steps", cfg.steps},
                                 {"lr", cfg.lr},
                                 {"momentum", cfg.momentum},
                                 {"weight_decay", cfg.weight_decay},
                                 {"episodes", episodes.size()},
                                 {"seed", cfg.seed},
                                 {"loss_trace", result.loss_trace},
                                 {"weights", cfg.out_path}};
  write_text(cfg.report_path, report.dump(2) + "\n");
  return 0;
}

int run_synth_gen(const RunConfig& cfg) {
  validate_shape(cfg.shape);
  if (cfg.out_path.empty()) throw Error(ErrorKind::kInvalidConfig, "synth-gen requires --out");
  const SynthConfig base = synth_for(cfg);
  validate(base);
  const fs::path dir(cfg.out_path);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIoError, "cannot create " + dir.string());
  const std::uint64_t seed = run_seed(cfg.seed, 0);
  for (std::size_t t = 0; t < cfg.tasks; ++t) {
    SynthConfig c = base;
    c.seed = task_seed(seed, t);
    char name[32];
    std::snprintf(name, sizeof name, "episode_%05zu.npz", t);
    write_episode_archive(generate_synthetic_episode(c), dir / name);
  }
  return 0;
}

nlohmann::json variant_json(const std::string& name, const MetricsReport& report) {
  nlohmann::json doc = nlohmann::json::parse(report_json(report));
  doc["variant"] = name;
  return doc;
}

int run_ablate(const RunConfig& cfg) {
  validate(cfg.params);
  validate_shape(cfg.shape);
  std::size_t tasks = cfg.tasks;
  const EpisodeFactory factory = make_factory(cfg, tasks);
  const auto weights = load_weights(cfg);

  EvalOptions options;
  options.runs = cfg.runs;
  options.tasks = tasks;
  options.seed = cfg.seed;
  options.jobs = cfg.jobs;

  HyperParams full = cfg.params;
  full.nonparametric_gnn = false;
  HyperParams no_unlabeled = full;
  no_unlabeled.lambda_r = 0.0;
  HyperParams nonparametric = full;
  nonparametric.nonparametric_gnn = true;

  const MetricsReport full_report = evaluate(factory, full, weights, options);
  const MetricsReport no_unlabeled_report = evaluate(factory, no_unlabeled, weights, options);
  const MetricsReport nonparametric_report = evaluate(factory, nonparametric, weights, options);

  // Re-run the nonparametric variant under a randomly perturbed matrix.
  const std::size_t dim = factory(0, 0, task_seed(run_seed(cfg.seed, 0), 0)).channels();
  MessageWeights perturbed = weights ? *weights : MessageWeights::scaled_identity(dim);
  Rng rng(mix_seed(cfg.seed, 0xAB1A7E));
  for (float& v : perturbed.matrix) v += static_cast<float>(rng.normal());
  const MetricsReport perturbed_report = evaluate(factory, nonparametric, perturbed, options);
  const bool invariant = report_json(perturbed_report) == report_json(nonparametric_report);

  const nlohmann::json doc = {
      {"variants",
       {variant_json("full", full_report), variant_json("no_unlabeled", no_unlabeled_report),
        variant_json("nonparametric_gnn", nonparametric_report)}},
      {"full_mean_iou", full_report.mean_iou},
      {"no_unlabeled_mean_iou", no_unlabeled_report.mean_iou},
      {"nonparametric_mean_iou", nonparametric_report.mean_iou},
      {"full_ge_no_unlabeled", full_report.mean_iou >= no_unlabeled_report.mean_iou},
      {"nonparametric_w_invariant", invariant}};
  write_text(cfg.out_path, doc.dump(2) + "\n");
  return 0;
}

void print_error(std::string_view kind, const std::string& message) {
  const nlohmann::json line = {{"error", kind}, {"message", message}};
  std::cerr << line.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Part-aware prototype few-shot segmentation"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  RunConfig cfg;

  CLI::App* eval = app.add_subcommand("eval", "Episodic evaluation on archives or synthetic episodes");
  add_model_options(*eval, cfg);
  add_episode_options(*eval, cfg);
  add_run_options(*eval, cfg);
  add_source_options(*eval, cfg);
  add_synth_options(*eval, cfg);
  eval->add_option("--out", cfg.out_path, "Metrics JSON path (default: stdout)");
  eval->add_option("--save-predictions", cfg.predictions_dir, "Write predicted masks to this directory");

  CLI::App* train = app.add_subcommand("train", "Train the message weights with SGD");
  add_model_options(*train, cfg);
  add_episode_options(*train, cfg);
  add_source_options(*train, cfg);
  add_synth_options(*train, cfg);
  train->add_option("--out", cfg.out_path, "Output weight archive")->required();
  train->add_option("--report", cfg.report_path, "Training report JSON path (default: stdout)");
  train->add_option("--lr", cfg.lr, "Learning rate");
  train->add_option("--momentum", cfg.momentum, "SGD momentum");
  train->add_option("--weight-decay", cfg.weight_decay, "L2 weight decay");
  train->add_option("--steps", cfg.steps, "SGD steps");
  train->add_option("--train-episodes", cfg.train_episodes, "Episodes cycled through during training");

  CLI::App* synth_gen = app.add_subcommand("synth-gen", "Write synthetic episode archives");
  add_episode_options(*synth_gen, cfg);
  add_synth_options(*synth_gen, cfg);
  synth_gen->add_option("--tasks", cfg.tasks, "Number of archives")->default_val(10);
  synth_gen->add_option("--out", cfg.out_path, "Output directory")->required();

  CLI::App* ablate = app.add_subcommand(
      "ablate", "Full pipeline, no unlabeled refinement and nonparametric messages in one report");
  add_model_options(*ablate, cfg);
  add_episode_options(*ablate, cfg);
  add_run_options(*ablate, cfg);
  add_source_options(*ablate, cfg);
  add_synth_options(*ablate, cfg);
  ablate->add_option("--out", cfg.out_path, "Report JSON path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("InvalidArgument", e.what());
    return 1;
  }

  try {
    if (eval->parsed()) return run_eval(cfg);
    if (train->parsed()) return run_train(cfg);
    if (synth_gen->parsed()) return run_synth_gen(cfg);
    return run_ablate(cfg);
  } catch (const Error& e) {
    print_error(to_string(e.kind()), e.what());
    return is_io_error(e.kind()) ? 2 : 1;
  } catch (const std::exception& e) {
    print_error("InternalError", e.what());
    return 1;
  }
}
