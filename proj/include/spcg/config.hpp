#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spcg/data.hpp"
#include "spcg/evaluation.hpp"
#include "spcg/models.hpp"
#include "spcg/synthetic.hpp"
#include "spcg/training.hpp"

namespace spcg {

struct DatasetSpec {
  std::filesystem::path source;
  std::filesystem::path target;
  std::optional<std::filesystem::path> target_test;
  /// When target_test is absent: number of leading target samples used for
  /// GAN training; the remainder becomes the test split.
  std::optional<int> target_split_train;
};

struct StageCrops {
  std::optional<data::CropSpec> train_da;
  std::optional<data::CropSpec> translate;
  std::optional<data::CropSpec> eval;
};

struct ExperimentConfig {
  std::string direction = "custom";
  std::uint64_t seed = 1;
  std::filesystem::path output = "runs/out";
  bool deterministic = false;
  eval::DaMethod method = eval::DaMethod::sp_cyclegan;  // arm for single-stage runs

  DatasetSpec datasets;
  ModelConfig model;
  LossConfig loss;  // copied into both train configs at load time
  train::TrainConfig gan_train;
  train::TrainConfig seg_train;
  StageCrops crops;
  std::optional<data::SynthSpec> synth;

  void validate() const;
};

/// key/value pairs applied on top of the file, dotted paths into the JSON
/// tree ("gan_train.total_epochs", "output", ...). Values are parsed as JSON
/// when possible, else taken as strings.
using OverrideList = std::vector<std::pair<std::string, std::string>>;

ExperimentConfig load_experiment_config_file(const std::filesystem::path& path,
                                             const OverrideList& overrides = {});
ExperimentConfig load_experiment_config_json(const std::string& json_text,
                                             const OverrideList& overrides = {});

/// Preset lookup: $SPCG_PRESET_DIR, then presets/ next to the running binary.
std::filesystem::path resolve_preset(const std::string& name);

/// Environment overrides: SPCG_gan_train__total_epochs=5 sets
/// gan_train.total_epochs. Collected in sorted-key order.
OverrideList environment_overrides();

}  // namespace spcg
