#include "spcg/config.hpp"

#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>

#include "spcg/json_convert.hpp"
#include "spcg/rng.hpp"

extern char** environ;

namespace spcg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json parse_json_text(const std::string& text, const std::string& origin) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw_config("unparsable JSON in " + origin);
  if (!j.is_object()) throw_config(origin + " must hold a JSON object");
  return j;
}

void set_dotted(json& root, const std::string& dotted, const std::string& raw_value) {
  json value = json::parse(raw_value, nullptr, false);
  if (value.is_discarded()) value = raw_value;  // plain string

  json* node = &root;
  std::size_t begin = 0;
  while (true) {
    const std::size_t dot = dotted.find('.', begin);
    const std::string key = dotted.substr(begin, dot == std::string::npos ? dot : dot - begin);
    if (key.empty()) throw_config("override key '" + dotted + "' has an empty segment");
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    if (!node->contains(key) || !(*node)[key].is_object()) (*node)[key] = json::object();
    node = &(*node)[key];
    begin = dot + 1;
  }
}

data::CropSpec parse_crop(const json& j, const std::string& where) {
  data::CropSpec spec;
  if (j.contains("resize_to") && !j.at("resize_to").is_null()) {
    const auto dims = j.at("resize_to").get<std::vector<int>>();
    if (dims.size() != 2) throw_config(where + ".resize_to must be [height, width]");
    spec.resize_to = std::make_pair(dims[0], dims[1]);
  }
  spec.kind = data::crop_kind_from_name(j.value("kind", std::string("center")));
  if (!j.contains("size")) throw_config(where + " needs a size [height, width]");
  const auto size = j.at("size").get<std::vector<int>>();
  if (size.size() != 2) throw_config(where + ".size must be [height, width]");
  spec.crop_h = size[0];
  spec.crop_w = size[1];
  return spec;
}

LossConfig parse_loss(const json& j) {
  LossConfig loss;
  loss.alpha = j.value("alpha", loss.alpha);
  loss.beta = j.value("beta", loss.beta);
  loss.gamma = j.value("gamma", loss.gamma);
  loss.epsilon = j.value("epsilon", loss.epsilon);
  loss.zeta = j.value("zeta", loss.zeta);
  loss.lambda_cyc = j.value("lambda_cyc", loss.lambda_cyc);
  return loss;
}

train::TrainConfig parse_train(const json& j, const train::TrainConfig& defaults) {
  train::TrainConfig cfg = defaults;
  cfg.total_epochs = j.value("total_epochs", cfg.total_epochs);
  cfg.anneal_start_epoch = j.value("anneal_start_epoch", cfg.anneal_start_epoch);
  cfg.lr_gan = j.value("lr_gan", cfg.lr_gan);
  cfg.lr_seg = j.value("lr_seg", cfg.lr_seg);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.buffer_capacity = j.value("buffer_capacity", cfg.buffer_capacity);
  cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

data::SynthSpec parse_synth(const json& j, std::uint64_t default_seed) {
  data::SynthSpec spec;
  spec.height = j.value("height", spec.height);
  spec.width = j.value("width", spec.width);
  spec.channels = j.value("channels", spec.channels);
  spec.fg_classes = j.value("fg_classes", spec.fg_classes);
  spec.count_a = j.value("count_a", spec.count_a);
  spec.count_b = j.value("count_b", spec.count_b);
  spec.seed = j.value("seed", default_seed);
  if (j.contains("shift")) {
    const json& s = j.at("shift");
    spec.shift.remap_gain = s.value("remap_gain", spec.shift.remap_gain);
    spec.shift.remap_offset = s.value("remap_offset", spec.shift.remap_offset);
    spec.shift.texture_amplitude = s.value("texture_amplitude", spec.shift.texture_amplitude);
    spec.shift.texture_blur_sigma = s.value("texture_blur_sigma", spec.shift.texture_blur_sigma);
  }
  return spec;
}

std::string substitute_output(std::string path, const std::string& output) {
  const std::string token = "${output}";
  std::size_t pos;
  while ((pos = path.find(token)) != std::string::npos) {
    path.replace(pos, token.size(), output);
  }
  return path;
}

ExperimentConfig from_json_tree(const json& j) {
  ExperimentConfig cfg;
  try {
    cfg.direction = j.value("direction", cfg.direction);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.output = fs::path(j.value("output", cfg.output.string()));
    cfg.deterministic = j.value("deterministic", cfg.deterministic);
    cfg.method = eval::da_method_from_name(j.value("method", std::string("sp_cyclegan")));

    if (j.contains("model")) cfg.model = j.at("model").get<ModelConfig>();
    if (!j.contains("model") || !j.at("model").contains("init_seed")) {
      cfg.model.init_seed = mix64(cfg.seed, "model-init");
    }
    if (j.contains("loss")) cfg.loss = parse_loss(j.at("loss"));

    train::TrainConfig gan_defaults;
    gan_defaults.seed = mix64(cfg.seed, "gan-train");
    cfg.gan_train = j.contains("gan_train") ? parse_train(j.at("gan_train"), gan_defaults)
                                            : gan_defaults;
    if (!j.contains("gan_train") || !j.at("gan_train").contains("seed")) {
      cfg.gan_train.seed = mix64(cfg.seed, "gan-train");
    }

    train::TrainConfig seg_defaults;
    seg_defaults.total_epochs = 200;
    seg_defaults.anneal_start_epoch = 150;
    seg_defaults.seed = mix64(cfg.seed, "seg-train");
    cfg.seg_train = j.contains("seg_train") ? parse_train(j.at("seg_train"), seg_defaults)
                                            : seg_defaults;
    if (!j.contains("seg_train") || !j.at("seg_train").contains("seed")) {
      cfg.seg_train.seed = mix64(cfg.seed, "seg-train");
    }
    cfg.gan_train.loss = cfg.loss;
    cfg.seg_train.loss = cfg.loss;

    if (j.contains("crops")) {
      const json& crops = j.at("crops");
      if (crops.contains("train_da") && !crops.at("train_da").is_null()) {
        cfg.crops.train_da = parse_crop(crops.at("train_da"), "crops.train_da");
      }
      if (crops.contains("translate") && !crops.at("translate").is_null()) {
        cfg.crops.translate = parse_crop(crops.at("translate"), "crops.translate");
      }
      if (crops.contains("eval") && !crops.at("eval").is_null()) {
        cfg.crops.eval = parse_crop(crops.at("eval"), "crops.eval");
      }
    }

    if (j.contains("datasets")) {
      const json& d = j.at("datasets");
      const std::string out = cfg.output.string();
      cfg.datasets.source = substitute_output(d.value("source", std::string()), out);
      cfg.datasets.target = substitute_output(d.value("target", std::string()), out);
      if (d.contains("target_test") && !d.at("target_test").is_null()) {
        cfg.datasets.target_test = substitute_output(d.at("target_test").get<std::string>(), out);
      }
      if (d.contains("target_split_train") && !d.at("target_split_train").is_null()) {
        cfg.datasets.target_split_train = d.at("target_split_train").get<int>();
      }
    }

    if (j.contains("synth") && !j.at("synth").is_null()) {
      cfg.synth = parse_synth(j.at("synth"), mix64(cfg.seed, "synth"));
    }
  } catch (const json::exception& e) {
    throw_config(std::string("invalid experiment config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (direction.empty()) throw_config("direction must not be empty");
  if (output.empty()) throw_config("output directory must not be empty");
  model.validate();
  loss.validate();
  gan_train.validate();
  seg_train.validate();
  if (crops.train_da) crops.train_da->validate();
  if (crops.translate) crops.translate->validate();
  if (crops.eval) crops.eval->validate();
  if (synth) synth->validate();
  if (datasets.target_split_train && *datasets.target_split_train < 1) {
    throw_config("datasets.target_split_train must be >= 1");
  }
}

OverrideList environment_overrides() {
  OverrideList out;
  for (char** env = environ; *env != nullptr; ++env) {
    const std::string entry(*env);
    if (entry.rfind("SPCG_", 0) != 0) continue;
    const std::size_t eq = entry.find('=');
    if (eq == std::string::npos) continue;
    std::string key = entry.substr(5, eq - 5);
    if (key == "PRESET_DIR") continue;  // reserved for preset lookup
    const std::string value = entry.substr(eq + 1);
    std::size_t pos;
    while ((pos = key.find("__")) != std::string::npos) key.replace(pos, 2, ".");
    out.emplace_back(std::move(key), value);
  }
  std::sort(out.begin(), out.end());
  return out;
}

ExperimentConfig load_experiment_config_json(const std::string& json_text,
                                             const OverrideList& overrides) {
  json tree = parse_json_text(json_text, "experiment config");
  for (const auto& [key, value] : environment_overrides()) set_dotted(tree, key, value);
  for (const auto& [key, value] : overrides) set_dotted(tree, key, value);
  return from_json_tree(tree);
}

ExperimentConfig load_experiment_config_file(const fs::path& path, const OverrideList& overrides) {
  std::ifstream f(path);
  if (!f) throw_config("cannot open config file " + path.string());
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  json tree = parse_json_text(text, path.string());
  for (const auto& [key, value] : environment_overrides()) set_dotted(tree, key, value);
  for (const auto& [key, value] : overrides) set_dotted(tree, key, value);
  return from_json_tree(tree);
}

fs::path resolve_preset(const std::string& name) {
  std::vector<fs::path> candidates;
  if (const char* dir = std::getenv("SPCG_PRESET_DIR")) {
    candidates.push_back(fs::path(dir) / (name + ".json"));
  }
  char exe[4096];
  const ssize_t len = ::readlink("/proc/self/exe", exe, sizeof(exe) - 1);
  if (len > 0) {
    exe[len] = '\0';
    const fs::path exe_dir = fs::path(exe).parent_path();
    candidates.push_back(exe_dir / "presets" / (name + ".json"));
    candidates.push_back(exe_dir / ".." / "presets" / (name + ".json"));
  }
  candidates.push_back(fs::path("presets") / (name + ".json"));
  for (const fs::path& candidate : candidates) {
    if (fs::exists(candidate)) return candidate;
  }
  throw_config("preset '" + name + "' not found (set SPCG_PRESET_DIR or use --config)");
}

}  // namespace spcg
