#pragma once

#include <filesystem>

#include "tcplan/planner/model.hpp"

namespace tcplan::training {

inline constexpr int kCheckpointVersion = 1;

// One line of compact JSON (format_version, config, vocab, tensor table of
// name/shape/offset, blob_bytes, FNV-1a checksum of the blob), a newline,
// then the little-endian float32 blob.
void save_checkpoint(const planner::Model& model, const std::filesystem::path& path);

// Raises CheckpointError on version mismatch, truncation, checksum mismatch
// or a tensor table that disagrees with the configured layout.
planner::Model load_checkpoint(const std::filesystem::path& path);

}  // namespace tcplan::training
