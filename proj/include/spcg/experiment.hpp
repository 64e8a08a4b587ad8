#pragma once

#include "spcg/config.hpp"

namespace spcg {

enum class Stage { synth, train_da, translate, train_seg, eval, all };

Stage stage_from_name(const std::string& name);
const char* stage_name(Stage stage);

struct StageResult {
  std::vector<std::filesystem::path> artifacts;
  std::string summary;
};

/// Executes one pipeline stage (or `all`: every stage for the three method
/// arms followed by the comparison report) under the given configuration.
StageResult run_stage(const ExperimentConfig& cfg, Stage stage);

}  // namespace spcg
