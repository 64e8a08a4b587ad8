#pragma once

#include <filesystem>
#include <string>

#include "spcg/models.hpp"

namespace spcg {

struct CheckpointMeta {
  ModelConfig model;
  int epoch = 0;
  std::string role;  // e.g. "bundle", "segmenter"
};

/// Self-describing binary archive: a JSON header (model config, epoch, role,
/// tensor index keyed by module path) followed by raw little-endian doubles.
/// Writes are atomic (temp file, then rename).
void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<nn::NamedParam>& params, const ModelConfig& model,
                     int epoch, const std::string& role);

/// Loads parameters into an already-built network. The stored ModelConfig
/// must equal `expected`; tensor names and shapes must match exactly.
CheckpointMeta load_checkpoint(const std::filesystem::path& path,
                               const std::vector<nn::NamedParam>& params,
                               const ModelConfig& expected);

/// Header-only peek (no tensor payload).
CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path);

}  // namespace spcg
