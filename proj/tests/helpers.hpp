#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "partproto/episode.hpp"
#include "partproto/errors.hpp"
#include "partproto/synth.hpp"
#include "partproto/tensor.hpp"

namespace testing_util {

// Kind of the partproto::Error thrown by fn, or nullopt if none was thrown.
template <typename Fn>
std::optional<partproto::ErrorKind> thrown_kind(Fn&& fn) {
  try {
    fn();
  } catch (const partproto::Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

inline partproto::FeatureGrid random_grid(std::size_t h, std::size_t w, std::size_t c, std::mt19937_64& rng,
                                          double sd = 1.0) {
  std::normal_distribution<float> dist(0.0f, static_cast<float>(sd));
  std::vector<float> v(h * w * c);
  for (float& x : v) x = dist(rng);
  return {h, w, c, std::move(v)};
}

inline std::vector<float> random_vector(std::size_t n, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<float> dist(0.0f, static_cast<float>(sd));
  std::vector<float> v(n);
  for (float& x : v) x = dist(rng);
  return v;
}

// Small 1-way synthetic episode used across tests.
inline partproto::Episode small_episode(std::uint64_t seed, std::size_t channels = 8, std::size_t grid = 8,
                                        std::size_t n_unlabeled = 2) {
  partproto::SynthConfig c;
  c.channels = channels;
  c.grid_height = grid;
  c.grid_width = grid;
  c.n_unlabeled = n_unlabeled;
  c.jitter = 1.0;
  c.separation = 6.0;
  c.seed = seed;
  return partproto::generate_synthetic_episode(c);
}

// Fresh directory under the system temp path, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() /
           ("partproto_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

}  // namespace testing_util
