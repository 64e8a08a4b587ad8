#include "spcg/experiment.hpp"

#include <iostream>

#include "spcg/checkpoint.hpp"
#include "spcg/rng.hpp"

namespace spcg {

namespace fs = std::filesystem;

Stage stage_from_name(const std::string& name) {
  if (name == "synth") return Stage::synth;
  if (name == "train_da") return Stage::train_da;
  if (name == "translate") return Stage::translate;
  if (name == "train_seg") return Stage::train_seg;
  if (name == "eval") return Stage::eval;
  if (name == "all") return Stage::all;
  throw_config("unknown stage '" + name +
               "' (expected synth, train_da, translate, train_seg, eval or all)");
}

const char* stage_name(Stage stage) {
  switch (stage) {
    case Stage::synth: return "synth";
    case Stage::train_da: return "train_da";
    case Stage::translate: return "translate";
    case Stage::train_seg: return "train_seg";
    case Stage::eval: return "eval";
    case Stage::all: return "all";
  }
  throw_config("unknown stage");
}

namespace {

struct ArmPaths {
  fs::path root;
  fs::path checkpoints;
  fs::path gan_final;
  fs::path gan_log;
  fs::path translated;
  fs::path segmenter_dir;
  fs::path segmenter_best;
  fs::path seg_log;
  fs::path metrics_json;
  fs::path metrics_text;
  fs::path per_image_csv;
};

ArmPaths arm_paths(const ExperimentConfig& cfg, eval::DaMethod method) {
  ArmPaths p;
  p.root = cfg.output / eval::da_method_name(method);
  p.checkpoints = p.root / "checkpoints";
  p.gan_final = p.checkpoints / "final.spck";
  p.gan_log = p.root / "gan_train.ndjson";
  p.translated = p.root / "translated";
  p.segmenter_dir = p.root / "segmenter";
  p.segmenter_best = p.segmenter_dir / "best.spck";
  p.seg_log = p.segmenter_dir / "seg_train.ndjson";
  p.metrics_json = p.root / "metrics.json";
  p.metrics_text = p.root / "metrics.txt";
  p.per_image_csv = p.root / "per_image.csv";
  return p;
}

int dataset_classes(const ModelConfig& model) {
  return model.num_classes == 1 ? 2 : model.num_classes;
}

real_t arm_zeta(const ExperimentConfig& cfg, eval::DaMethod method) {
  switch (method) {
    case eval::DaMethod::sp_cyclegan: return cfg.loss.zeta;
    case eval::DaMethod::default_cyclegan: return 0.0;  // architecture-identical ablation
    case eval::DaMethod::no_da: return 0.0;
  }
  throw_validation("unknown method");
}

data::Dataset load_dataset_dir(const ExperimentConfig& cfg, const fs::path& dir,
                               const char* role) {
  if (dir.empty()) throw_config(std::string("datasets.") + role + " is not configured");
  if (!fs::is_directory(dir)) {
    std::string hint = cfg.synth ? "; run synth first" : "";
    throw_data(std::string(role) + " dataset directory " + dir.string() + " does not exist" +
               hint);
  }
  return data::load_directory_dataset(dir, cfg.model.image_channels, dataset_classes(cfg.model));
}

data::Dataset target_train_split(const ExperimentConfig& cfg, const data::Dataset& target) {
  if (cfg.datasets.target_test || !cfg.datasets.target_split_train) return target;
  const int n = *cfg.datasets.target_split_train;
  if (n >= static_cast<int>(target.size())) {
    throw_config("target_split_train leaves no test samples (" + std::to_string(n) + " of " +
                 std::to_string(target.size()) + ")");
  }
  data::Dataset out;
  out.channels = target.channels;
  out.num_classes = target.num_classes;
  out.samples.assign(target.samples.begin(), target.samples.begin() + n);
  return out;
}

data::Dataset target_test_split(const ExperimentConfig& cfg, const data::Dataset& target) {
  if (cfg.datasets.target_test) {
    return load_dataset_dir(cfg, *cfg.datasets.target_test, "target_test");
  }
  if (!cfg.datasets.target_split_train) return target;
  const int n = *cfg.datasets.target_split_train;
  data::Dataset out;
  out.channels = target.channels;
  out.num_classes = target.num_classes;
  out.samples.assign(target.samples.begin() + n, target.samples.end());
  return out;
}

train::TrainConfig gan_config_for_arm(const ExperimentConfig& cfg, eval::DaMethod method) {
  train::TrainConfig out = cfg.gan_train;
  out.loss = cfg.loss;
  out.loss.zeta = arm_zeta(cfg, method);
  return out;
}

StageResult do_train_da(const ExperimentConfig& cfg, eval::DaMethod method) {
  if (method == eval::DaMethod::no_da) {
    throw_validation("the no_da arm skips GAN training; nothing to do for train_da");
  }
  const ArmPaths paths = arm_paths(cfg, method);
  const data::Dataset source = load_dataset_dir(cfg, cfg.datasets.source, "source");
  const data::Dataset target_all = load_dataset_dir(cfg, cfg.datasets.target, "target");
  const data::Dataset target = target_train_split(cfg, target_all);

  train::GanTrainOptions options;
  options.crop = cfg.crops.train_da;
  options.checkpoint_dir = paths.checkpoints;
  options.log_path = paths.gan_log;
  train::train_sp_cyclegan(source, target, cfg.model, gan_config_for_arm(cfg, method), options);

  StageResult result;
  result.artifacts = {paths.gan_final, paths.gan_log};
  result.summary = std::string("trained ") + eval::da_method_name(method) + " for " +
                   std::to_string(cfg.gan_train.total_epochs) + " epochs -> " +
                   paths.gan_final.string();
  return result;
}

StageResult do_translate(const ExperimentConfig& cfg, eval::DaMethod method) {
  const ArmPaths paths = arm_paths(cfg, method);
  const data::Dataset source = load_dataset_dir(cfg, cfg.datasets.source, "source");

  ModelBundle bundle;
  const nn::ResnetGenerator* generator = nullptr;
  if (method != eval::DaMethod::no_da) {
    if (!fs::exists(paths.gan_final)) {
      throw_data("no trained generator at " + paths.gan_final.string() + "; run train_da first");
    }
    bundle = build_model_bundle(cfg.model, arm_zeta(cfg, method) > 0.0);
    load_checkpoint(paths.gan_final, bundle.named_params(), cfg.model);
    generator = bundle.g.get();
  }

  const data::Dataset translated =
      train::translate_dataset(generator, source, cfg.crops.translate, paths.translated);

  StageResult result;
  result.artifacts = {paths.translated};
  result.summary = "translated " + std::to_string(source.size()) + " source images into " +
                   std::to_string(translated.size()) + " patches -> " +
                   paths.translated.string();
  return result;
}

StageResult do_train_seg(const ExperimentConfig& cfg, eval::DaMethod method) {
  const ArmPaths paths = arm_paths(cfg, method);
  if (!fs::is_directory(paths.translated)) {
    throw_data("no translated dataset at " + paths.translated.string() + "; run translate first");
  }
  const data::Dataset training_set = data::load_directory_dataset(
      paths.translated, cfg.model.image_channels, dataset_classes(cfg.model));

  train::TrainConfig seg_cfg = cfg.seg_train;
  seg_cfg.loss = cfg.loss;
  train::SegTrainOptions options;
  options.checkpoint_dir = paths.segmenter_dir;
  options.log_path = paths.seg_log;
  const train::SegTrainResult trained =
      train::train_segmenter(training_set, cfg.model, seg_cfg, options);

  StageResult result;
  result.artifacts = {paths.segmenter_best, paths.seg_log};
  result.summary = "trained segmenter (best epoch " + std::to_string(trained.best_epoch) +
                   ", FTL " + std::to_string(trained.best_loss) + ") -> " +
                   paths.segmenter_best.string();
  return result;
}

data::Dataset expand_eval_crops(const ExperimentConfig& cfg, const data::Dataset& test) {
  if (!cfg.crops.eval) return test;
  data::Dataset out;
  out.channels = test.channels;
  out.num_classes = test.num_classes;
  for (std::size_t i = 0; i < test.samples.size(); ++i) {
    for (data::PairedSample& patch :
         data::apply_crop(test.samples[i], *cfg.crops.eval, mix64(0xe7a1ULL, i))) {
      out.samples.push_back(std::move(patch));
    }
  }
  return out;
}

StageResult do_eval(const ExperimentConfig& cfg, eval::DaMethod method) {
  const ArmPaths paths = arm_paths(cfg, method);
  if (!fs::exists(paths.segmenter_best)) {
    throw_data("no trained segmenter at " + paths.segmenter_best.string() +
               "; run train_seg first");
  }
  const data::Dataset target_all = load_dataset_dir(cfg, cfg.datasets.target, "target");
  const data::Dataset test = expand_eval_crops(cfg, target_test_split(cfg, target_all));

  std::unique_ptr<nn::Segmenter> segmenter = build_segmenter(cfg.model);
  std::vector<nn::NamedParam> params;
  segmenter->collect("U", params);
  load_checkpoint(paths.segmenter_best, params, cfg.model);

  const eval::MetricsRecord record = eval::evaluate(*segmenter, test, cfg.direction, method);
  eval::write_metrics_json(paths.metrics_json, record);
  eval::write_metrics_text(paths.metrics_text, record);
  eval::write_per_image_csv(paths.per_image_csv, record);

  StageResult result;
  result.artifacts = {paths.metrics_json, paths.metrics_text, paths.per_image_csv};
  result.summary = eval::format_metrics_text(record);
  return result;
}

StageResult do_all(const ExperimentConfig& cfg) {
  const eval::DaMethod arms[] = {eval::DaMethod::sp_cyclegan, eval::DaMethod::default_cyclegan,
                                 eval::DaMethod::no_da};
  std::vector<eval::MetricsRecord> records;
  for (eval::DaMethod method : arms) {
    if (method != eval::DaMethod::no_da) do_train_da(cfg, method);
    do_translate(cfg, method);
    do_train_seg(cfg, method);
    do_eval(cfg, method);
    records.push_back(eval::read_metrics_json(arm_paths(cfg, method).metrics_json));
  }
  const eval::ComparisonReport report = eval::compare_methods(records);
  const fs::path comparison_json = cfg.output / "comparison.json";
  const fs::path comparison_text = cfg.output / "comparison.txt";
  eval::write_comparison_json(comparison_json, report);
  eval::write_comparison_text(comparison_text, report);

  StageResult result;
  result.artifacts = {comparison_json, comparison_text};
  result.summary = eval::format_comparison_text(report);
  return result;
}

}  // namespace

StageResult run_stage(const ExperimentConfig& cfg, Stage stage) {
  cfg.validate();
  fs::create_directories(cfg.output);
  switch (stage) {
    case Stage::synth: {
      if (!cfg.synth) throw_config("config has no synth block; nothing to synthesize");
      const data::SynthOutput out =
          data::generate_synthetic_domains(*cfg.synth, cfg.output / "datasets");
      StageResult result;
      result.artifacts = {out.domain_a, out.domain_b, out.manifest};
      result.summary = "synthetic domains written; manifest: " + out.manifest.string();
      return result;
    }
    case Stage::train_da: return do_train_da(cfg, cfg.method);
    case Stage::translate: return do_translate(cfg, cfg.method);
    case Stage::train_seg: return do_train_seg(cfg, cfg.method);
    case Stage::eval: return do_eval(cfg, cfg.method);
    case Stage::all: return do_all(cfg);
  }
  throw_config("unknown stage");
}

}  // namespace spcg
