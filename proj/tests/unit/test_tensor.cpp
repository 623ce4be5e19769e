#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "oracles.hpp"
#include "partproto/tensor.hpp"

using namespace partproto;
using testing_util::thrown_kind;

TEST_CASE("cosine similarity examples") {
  const std::vector<float> x{1, 0}, y{0, 1}, d{1, 1};
  CHECK(cosine_similarity(x, x) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cosine_similarity(x, y) == 0.0);
  CHECK(cosine_similarity(x, d) == doctest::Approx(0.7071067).epsilon(1e-6));
}

TEST_CASE("cosine similarity errors") {
  const std::vector<float> zero{0, 0}, x{1, 0}, three{1, 0, 0};
  CHECK(thrown_kind([&] { cosine_similarity(zero, x); }) == ErrorKind::kZeroNormVector);
  CHECK(thrown_kind([&] { cosine_similarity(x, zero); }) == ErrorKind::kZeroNormVector);
  CHECK(thrown_kind([&] { cosine_similarity(x, three); }) == ErrorKind::kDimensionMismatch);
  CHECK(clamped_cosine(zero, x) == 0.0);
}

TEST_CASE("cosine similarity properties on random vectors") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 1 + t % 17;
    const auto a = testing_util::random_vector(n, rng);
    const auto b = testing_util::random_vector(n, rng);
    const double ab = cosine_similarity(a, b);
    CHECK(std::abs(ab) <= 1.0 + 1e-6);
    CHECK(ab == cosine_similarity(b, a));
    CHECK(cosine_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(ab == doctest::Approx(oracle::cosine(a, b)).epsilon(1e-12));
    CHECK(clamped_cosine(a, b) == doctest::Approx(std::max(0.0, ab)).epsilon(1e-12));
  }
}

TEST_CASE("nearest mask resize") {
  // Left half class 1, right half background.
  std::vector<std::uint8_t> v(16, 0);
  for (std::size_t r = 0; r < 4; ++r) v[r * 4] = v[r * 4 + 1] = 1;
  const LabelGrid mask(4, 4, v);
  const LabelGrid small = resize_mask_nearest(mask, 2, 2);
  CHECK(small == LabelGrid(2, 2, std::vector<std::uint8_t>{1, 0, 1, 0}));
  CHECK(resize_mask_nearest(mask, 4, 4) == mask);
  CHECK(resize_mask_nearest(LabelGrid(5, 3, std::uint8_t{1}), 7, 2) == LabelGrid(7, 2, std::uint8_t{1}));
  CHECK(thrown_kind([&] { resize_mask_nearest(mask, 0, 2); }).has_value());
}

TEST_CASE("nearest mask resize matches the integer index oracle") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> label(0, 3);
  for (std::size_t in_h = 1; in_h <= 9; ++in_h) {
    for (std::size_t in_w = 1; in_w <= 9; in_w += 2) {
      std::vector<std::uint8_t> v(in_h * in_w);
      for (auto& x : v) x = static_cast<std::uint8_t>(label(rng) == 3 ? 255 : label(rng));
      const LabelGrid mask(in_h, in_w, v);
      for (std::size_t out_h = 1; out_h <= 12; ++out_h) {
        for (std::size_t out_w = 1; out_w <= 12; out_w += 3) {
          const LabelGrid out = resize_mask_nearest(mask, out_h, out_w);
          for (std::size_t y = 0; y < out_h; ++y) {
            for (std::size_t x = 0; x < out_w; ++x) {
              const auto sy = oracle::nearest_source(y, in_h, out_h);
              const auto sx = oracle::nearest_source(x, in_w, out_w);
              REQUIRE(out.at(y, x) == mask.at(sy, sx));
            }
          }
        }
      }
    }
  }
}

TEST_CASE("bilinear upsampling examples") {
  const ScoreGrid constant(3, 2, 0.3f);
  const ScoreGrid flat = upsample_bilinear(constant, 7, 5);
  for (float v : flat.values()) CHECK(v == 0.3f);

  const ScoreGrid row(1, 2, std::vector<float>{0.0f, 1.0f});
  const ScoreGrid up = upsample_bilinear(row, 1, 3);
  CHECK(up.at(0, 0) == 0.0f);
  CHECK(up.at(0, 1) == 0.5f);
  CHECK(up.at(0, 2) == 1.0f);

  const ScoreGrid single = upsample_bilinear(ScoreGrid(1, 1, 0.7f), 4, 4);
  for (float v : single.values()) CHECK(v == 0.7f);
}

TEST_CASE("bilinear upsampling matches the align-corners formula and stays in range") {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 40; ++t) {
    const std::size_t h = 1 + t % 5, w = 1 + (t / 5) % 4;
    const auto values = testing_util::random_vector(h * w, rng);
    const ScoreGrid grid(h, w, values);
    const std::size_t oh = h + t % 7, ow = w + t % 3;
    const ScoreGrid up = upsample_bilinear(grid, oh, ow);
    const float lo = *std::min_element(values.begin(), values.end());
    const float hi = *std::max_element(values.begin(), values.end());
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        CHECK(up.at(y, x) == doctest::Approx(oracle::bilinear(values, h, w, oh, ow, y, x)).epsilon(1e-6));
        CHECK(up.at(y, x) >= lo);
        CHECK(up.at(y, x) <= hi);
      }
    }
    CHECK(up.at(0, 0) == grid.at(0, 0));
    CHECK(up.at(oh - 1, ow - 1) == grid.at(h - 1, w - 1));
  }
}

TEST_CASE("gather class features") {
  const FeatureGrid grid(2, 2, 1, {10, 11, 12, 13});
  const LabelGrid mask(2, 2, std::vector<std::uint8_t>{1, 0, 0, 1});
  const auto ones = gather_class_features(grid, mask, 1);
  REQUIRE(ones.size() == 2);
  CHECK(ones[0] == std::vector<float>{10});
  CHECK(ones[1] == std::vector<float>{13});
  CHECK(gather_class_features(grid, mask, 2).empty());
  CHECK(gather_class_features(grid, LabelGrid(2, 2, kIgnoreLabel), 1).empty());
  CHECK(gather_class_features(grid, LabelGrid(2, 2, kIgnoreLabel), kIgnoreLabel).empty());
  CHECK(thrown_kind([&] { gather_class_features(grid, LabelGrid(3, 2, std::uint8_t{0}), 1); }) ==
        ErrorKind::kDimensionMismatch);
}

TEST_CASE("gathered classes partition the grid") {
  std::mt19937_64 rng(3);
  const FeatureGrid grid = testing_util::random_grid(6, 5, 3, rng);
  std::vector<std::uint8_t> v(30);
  std::size_t ignored = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = i % 7 == 0 ? kIgnoreLabel : static_cast<std::uint8_t>(i % 3);
    ignored += v[i] == kIgnoreLabel;
  }
  const LabelGrid mask(6, 5, v);
  std::size_t total = ignored;
  for (std::uint8_t c = 0; c < 3; ++c) total += gather_class_features(grid, mask, c).size();
  CHECK(total == grid.cell_count());
  CHECK(gather_all_features(grid).size() == grid.cell_count());
}

TEST_CASE("feature grids reject non-finite values") {
  CHECK(thrown_kind([] { FeatureGrid(1, 1, 2, {1.0f, NAN}); }).has_value());
  CHECK(thrown_kind([] { FeatureGrid(1, 1, 1, {INFINITY}); }).has_value());
  CHECK(thrown_kind([] { FeatureGrid(0, 1, 1, {}); }).has_value());
  CHECK(thrown_kind([] { FeatureGrid(2, 2, 1, {1, 2, 3}); }).has_value());
}
