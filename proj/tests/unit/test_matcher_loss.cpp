#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "oracles.hpp"
#include "partproto/loss.hpp"
#include "partproto/matcher.hpp"
#include "partproto/pipeline.hpp"

using namespace partproto;
using testing_util::thrown_kind;

namespace {

ScoreStack stack_of(std::size_t h, std::size_t w, const std::vector<std::vector<float>>& channels) {
  ScoreStack s;
  for (const auto& c : channels) s.channels.emplace_back(h, w, c);
  return s;
}

}  // namespace

TEST_CASE("part score maps are per-cell cosines") {
  std::mt19937_64 rng(3);
  const FeatureGrid q = testing_util::random_grid(3, 4, 5, rng);
  const PrototypeSet p{1, {testing_util::random_vector(5, rng), testing_util::random_vector(5, rng)},
                       PrototypeStage::kRefined};
  const auto maps = part_score_maps(q, p);
  REQUIRE(maps.size() == 2);
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t r = 0; r < 3; ++r) {
      for (std::size_t c = 0; c < 4; ++c) {
        CHECK(maps[j].at(r, c) == doctest::Approx(oracle::cosine(q.cell(r, c), p.prototypes[j])).epsilon(1e-6));
      }
    }
  }
  const PrototypeSet ctx{1, p.prototypes, PrototypeStage::kContextual};
  CHECK(thrown_kind([&] { part_score_maps(q, ctx); }) == ErrorKind::kStageMismatch);
  const PrototypeSet narrow{1, {{1, 2}}, PrototypeStage::kRefined};
  CHECK(thrown_kind([&] { part_score_maps(q, narrow); }) == ErrorKind::kDimensionMismatch);
}

TEST_CASE("fusion takes the max over parts and stacks background first") {
  const std::vector<std::vector<ScoreGrid>> maps{
      {ScoreGrid(1, 2, std::vector<float>{0.1f, 0.9f}), ScoreGrid(1, 2, std::vector<float>{0.5f, 0.2f})},
      {ScoreGrid(1, 2, std::vector<float>{0.3f, 0.3f})}};
  const ScoreStack s = fuse_and_stack(maps);
  REQUIRE(s.class_count() == 2);
  CHECK(s.channels[0].at(0, 0) == 0.5f);
  CHECK(s.channels[0].at(0, 1) == 0.9f);
  CHECK(s.channels[1].at(0, 0) == 0.3f);
}

TEST_CASE("prediction upsamples scores then takes the argmax") {
  // Background wins on the left, the class on the right; ties go to the
  // lower channel.
  const ScoreStack s = stack_of(1, 2, {{1.0f, 0.0f}, {0.0f, 1.0f}});
  const LabelGrid pred = predict_query_mask(s, 1, 5, {9});
  CHECK(pred == LabelGrid(1, 5, std::vector<std::uint8_t>{0, 0, 0, 9, 9}));
  const ScoreStack tie = stack_of(1, 1, {{0.5f}, {0.5f}});
  CHECK(argmax_channels(tie).at(0, 0) == 0);
  CHECK(predict_query_mask(tie, 2, 2, {3}) == LabelGrid(2, 2, std::uint8_t{0}));
  const ScoreStack three = stack_of(1, 1, {{0.1f}, {0.2f}, {0.7f}});
  CHECK(predict_query_mask(three, 1, 1, {4, 11}).at(0, 0) == 11);
}

TEST_CASE("cross-entropy examples") {
  const ScoreStack uniform = stack_of(2, 2, {std::vector<float>(4, 0.3f), std::vector<float>(4, 0.3f)});
  const LabelGrid labels(2, 2, std::vector<std::uint8_t>{0, 1, 1, 0});
  CHECK(meta_cross_entropy_loss(uniform, labels, 20.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  const ScoreStack sharp = stack_of(1, 1, {{-1.0f}, {1.0f}});
  CHECK(meta_cross_entropy_loss(sharp, LabelGrid(1, 1, std::uint8_t{1}), 20.0) < 1e-10);

  // Cell 0: scores (0.5, 0.1), label 0. Cell 1: scores (0.2, 0.9), label 1.
  const ScoreStack two = stack_of(1, 2, {{0.5f, 0.2f}, {0.1f, 0.9f}});
  const double c0 = -std::log(std::exp(0.5) / (std::exp(0.5) + std::exp(0.1)));
  const double c1 = -std::log(std::exp(0.9) / (std::exp(0.2) + std::exp(0.9)));
  const double expected = (c0 + c1) / 2.0;
  CHECK(meta_cross_entropy_loss(two, LabelGrid(1, 2, std::vector<std::uint8_t>{0, 1}), 1.0) ==
        doctest::Approx(expected).epsilon(1e-6));

  LabelGrid ignored(1, 2, std::vector<std::uint8_t>{0, kIgnoreLabel});
  CHECK(meta_cross_entropy_loss(two, ignored, 1.0) == doctest::Approx(c0).epsilon(1e-6));
  CHECK(meta_cross_entropy_loss(two, LabelGrid(1, 2, kIgnoreLabel), 1.0) == 0.0);
  CHECK(thrown_kind([&] { meta_cross_entropy_loss(two, LabelGrid(2, 2, std::uint8_t{0}), 1.0); }) ==
        ErrorKind::kDimensionMismatch);
}

TEST_CASE("cross-entropy matches the softmax oracle on random stacks") {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (int t = 0; t < 50; ++t) {
    const std::size_t c = 2 + t % 4, h = 1 + t % 3, w = 1 + t % 5;
    std::vector<std::vector<float>> ch(c, std::vector<float>(h * w));
    for (auto& v : ch) for (float& x : v) x = u(rng);
    std::vector<std::uint8_t> lab(h * w);
    for (auto& l : lab) l = static_cast<std::uint8_t>(rng() % c);
    const double temp = 0.5 + t % 20;
    double sum = 0.0;
    for (std::size_t i = 0; i < h * w; ++i) {
      oracle::Vec s;
      for (std::size_t k = 0; k < c; ++k) s.push_back(ch[k][i]);
      sum += oracle::cross_entropy(s, lab[i], temp);
    }
    const double loss = meta_cross_entropy_loss(stack_of(h, w, ch), LabelGrid(h, w, lab), temp);
    CHECK(loss == doctest::Approx(sum / static_cast<double>(h * w)).epsilon(1e-9));
    CHECK(loss >= 0.0);
  }
}

TEST_CASE("episode loss sums the query and support terms") {
  const Episode ep = testing_util::small_episode(8);
  HyperParams params;
  const auto protos = build_episode_prototypes(ep, params, MessageWeights::scaled_identity(ep.channels()), 1);
  const EpisodeLoss loss = episode_loss(ep, protos, params.score_temperature);
  CHECK(loss.query_ce >= 0.0);
  CHECK(loss.support_ce >= 0.0);
  CHECK(loss.total == loss.query_ce + loss.support_ce);
  CHECK(std::isfinite(loss.total));

  // Support term scores the support grid against the same prototypes.
  const auto masks = support_masks_at_feature_resolution(ep);
  const double support = meta_cross_entropy_loss(score_grid(ep.support[0][0].features, protos.refined),
                                                 masks[0][0], params.score_temperature);
  CHECK(loss.support_ce == doctest::Approx(support).epsilon(1e-12));
}
