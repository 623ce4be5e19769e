#pragma once

#include <filesystem>

#include "partproto/episode.hpp"
#include "partproto/tensor.hpp"

namespace partproto {

/// Manifest schema version written into every archive.
inline constexpr int kArchiveFormatVersion = 1;

/// Writes `episode` as a stored ZIP of NPY arrays plus `manifest.json`.
/// Throws InvalidEpisode before touching the filesystem, IoError on write
/// failure.
void write_episode_archive(const Episode& episode, const std::filesystem::path& path);

/// Parses and validates an episode archive. Throws IoError,
/// MalformedArchive or InvalidEpisode.
Episode read_episode_archive(const std::filesystem::path& path);

/// Single-array archive holding one label map (entry `mask`).
void write_mask_archive(const LabelGrid& mask, const std::filesystem::path& path);
LabelGrid read_mask_archive(const std::filesystem::path& path);

}  // namespace partproto
