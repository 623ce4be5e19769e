#include <benchmark/benchmark.h>

#include "partproto/clustering.hpp"
#include "partproto/evaluate.hpp"
#include "partproto/pipeline.hpp"
#include "partproto/synth.hpp"

namespace {

using namespace partproto;

Episode default_episode(std::uint64_t seed) {
  SynthConfig c;
  c.seed = seed;
  return generate_synthetic_episode(c);
}

void BM_SynthEpisode(benchmark::State& state) {
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(default_episode(seed++));
}
BENCHMARK(BM_SynthEpisode)->Unit(benchmark::kMillisecond);

void BM_KMeans(benchmark::State& state) {
  const Episode ep = default_episode(1);
  const auto features = support_class_features(ep);
  const auto k = static_cast<std::size_t>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) {
    for (const auto& cls : features) benchmark::DoNotOptimize(kmeans(cls, k, seed++));
  }
}
BENCHMARK(BM_KMeans)->Arg(1)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_Slic(benchmark::State& state) {
  const Episode ep = default_episode(2);
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(slic_feature_regions(ep.unlabeled[0], n, 0.1, 10));
}
BENCHMARK(BM_Slic)->Arg(17)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_RegionPool(benchmark::State& state) {
  const Episode ep = default_episode(3);
  const HyperParams params;
  for (auto _ : state) benchmark::DoNotOptimize(build_region_pool(ep.unlabeled, params));
}
BENCHMARK(BM_RegionPool)->Unit(benchmark::kMillisecond);

void BM_EvaluateEpisode(benchmark::State& state) {
  const Episode ep = default_episode(4);
  HyperParams params;
  params.lambda_r = state.range(0) ? 0.2 : 0.0;
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_episode(ep, params, std::nullopt, seed++));
}
BENCHMARK(BM_EvaluateEpisode)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
