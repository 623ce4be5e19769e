#pragma once

#include <cstddef>
#include <cstdint>

#include "partproto/episode.hpp"

namespace partproto {

/// Desk-scale stand-in for backbone features of real images.
///
/// Every class identifier owns a fixed mean direction (drawn from
/// `world_seed`) of norm `separation`; background has one too. Each object
/// instance in an image shifts its class mean by a per-instance offset and
/// each cell adds its own noise. `jitter` is the per-channel standard
/// deviation of the total intra-class variation and `instance_share` the
/// fraction of its variance that is shared by the whole instance.
struct SynthConfig {
  std::size_t channels = 64;
  std::size_t grid_height = 32;
  std::size_t grid_width = 32;
  /// Image pixels per feature cell along each axis.
  std::size_t image_stride = 2;

  std::size_t n_way = 1;
  std::size_t k_shot = 1;
  std::size_t n_unlabeled = 6;
  std::size_t n_query = 1;

  std::size_t blobs_min = 1;
  std::size_t blobs_max = 2;
  /// Blob radius range as a fraction of the shorter grid side.
  double radius_min = 0.15;
  double radius_max = 0.3;

  double jitter = 2.0;
  double instance_share = 0.5;
  double separation = 10.0;
  /// Class identifiers are drawn from 1..class_pool.
  std::size_t class_pool = 20;
  std::uint64_t world_seed = 2020;
  std::uint64_t seed = 0;
};

/// Throws InvalidConfig on the first violated field.
void validate(const SynthConfig& config);

/// Builds one episode from blobs on a background field. Masks are the
/// exact blob footprints replicated to image resolution, so downsampling
/// them recovers the cell labels. Unlabeled grids reuse the class
/// generators with fresh offsets and noise.
Episode generate_synthetic_episode(const SynthConfig& config);

}  // namespace partproto
