#include "spcg/spcg.h"

#include <string>

#include "spcg/experiment.hpp"

namespace {

thread_local std::string g_last_error;

spcg_status status_from_category(spcg::ErrorCategory category) {
  switch (category) {
    case spcg::ErrorCategory::config: return SPCG_ERROR_CONFIG;
    case spcg::ErrorCategory::data:
    case spcg::ErrorCategory::dimension:
    case spcg::ErrorCategory::validation:
    case spcg::ErrorCategory::io: return SPCG_ERROR_DATA;
    case spcg::ErrorCategory::training: return SPCG_ERROR_TRAINING;
    case spcg::ErrorCategory::internal: return SPCG_ERROR_INTERNAL;
  }
  return SPCG_ERROR_INTERNAL;
}

}  // namespace

struct spcg_experiment {
  // config source kept verbatim; overrides re-applied on every run
  enum class Source { file, json, preset } source = Source::file;
  std::string config_text_or_path;
  spcg::OverrideList overrides;
  std::string last_error;
  std::string summary;
};

extern "C" {

const char* spcg_version(void) { return "0.1.0"; }

const char* spcg_status_name(spcg_status status) {
  switch (status) {
    case SPCG_OK: return "ok";
    case SPCG_ERROR_CONFIG: return "config_error";
    case SPCG_ERROR_DATA: return "data_error";
    case SPCG_ERROR_TRAINING: return "training_error";
    case SPCG_ERROR_INVALID_ARGUMENT: return "invalid_argument";
    case SPCG_ERROR_INTERNAL: return "internal_error";
  }
  return "unknown";
}

const char* spcg_last_error(void) { return g_last_error.c_str(); }

spcg_status spcg_experiment_open(const char* config_path, spcg_experiment** out) {
  if (!out) return SPCG_ERROR_INVALID_ARGUMENT;
  *out = nullptr;
  if (!config_path) {
    g_last_error = "config_path is null";
    return SPCG_ERROR_INVALID_ARGUMENT;
  }
  try {
    // fail early on malformed configs
    spcg::load_experiment_config_file(config_path);
    auto* exp = new spcg_experiment();
    exp->source = spcg_experiment::Source::file;
    exp->config_text_or_path = config_path;
    *out = exp;
    return SPCG_OK;
  } catch (const spcg::Error& e) {
    g_last_error = e.what();
    return status_from_category(e.category());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SPCG_ERROR_INTERNAL;
  }
}

spcg_status spcg_experiment_open_json(const char* config_json, spcg_experiment** out) {
  if (!out) return SPCG_ERROR_INVALID_ARGUMENT;
  *out = nullptr;
  if (!config_json) {
    g_last_error = "config_json is null";
    return SPCG_ERROR_INVALID_ARGUMENT;
  }
  try {
    spcg::load_experiment_config_json(config_json);
    auto* exp = new spcg_experiment();
    exp->source = spcg_experiment::Source::json;
    exp->config_text_or_path = config_json;
    *out = exp;
    return SPCG_OK;
  } catch (const spcg::Error& e) {
    g_last_error = e.what();
    return status_from_category(e.category());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SPCG_ERROR_INTERNAL;
  }
}

spcg_status spcg_experiment_open_preset(const char* preset_name, spcg_experiment** out) {
  if (!out) return SPCG_ERROR_INVALID_ARGUMENT;
  *out = nullptr;
  if (!preset_name) {
    g_last_error = "preset_name is null";
    return SPCG_ERROR_INVALID_ARGUMENT;
  }
  try {
    const std::filesystem::path path = spcg::resolve_preset(preset_name);
    spcg::load_experiment_config_file(path);
    auto* exp = new spcg_experiment();
    exp->source = spcg_experiment::Source::file;
    exp->config_text_or_path = path.string();
    *out = exp;
    return SPCG_OK;
  } catch (const spcg::Error& e) {
    g_last_error = e.what();
    return status_from_category(e.category());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SPCG_ERROR_INTERNAL;
  }
}

spcg_status spcg_experiment_override(spcg_experiment* exp, const char* key, const char* value) {
  if (!exp) return SPCG_ERROR_INVALID_ARGUMENT;
  if (!key || !value) {
    exp->last_error = "override key/value is null";
    return SPCG_ERROR_INVALID_ARGUMENT;
  }
  exp->overrides.emplace_back(key, value);
  return SPCG_OK;
}

spcg_status spcg_experiment_run(spcg_experiment* exp, const char* stage) {
  if (!exp) return SPCG_ERROR_INVALID_ARGUMENT;
  if (!stage) {
    exp->last_error = "stage is null";
    return SPCG_ERROR_INVALID_ARGUMENT;
  }
  try {
    const spcg::ExperimentConfig cfg =
        exp->source == spcg_experiment::Source::json
            ? spcg::load_experiment_config_json(exp->config_text_or_path, exp->overrides)
            : spcg::load_experiment_config_file(exp->config_text_or_path, exp->overrides);
    const spcg::StageResult result = spcg::run_stage(cfg, spcg::stage_from_name(stage));
    exp->summary = result.summary;
    exp->last_error.clear();
    return SPCG_OK;
  } catch (const spcg::Error& e) {
    exp->last_error = e.what();
    return status_from_category(e.category());
  } catch (const std::exception& e) {
    exp->last_error = e.what();
    return SPCG_ERROR_INTERNAL;
  }
}

const char* spcg_experiment_summary(const spcg_experiment* exp) {
  return exp ? exp->summary.c_str() : "";
}

const char* spcg_experiment_error(const spcg_experiment* exp) {
  return exp ? exp->last_error.c_str() : "";
}

void spcg_experiment_close(spcg_experiment* exp) { delete exp; }

}  // extern "C"
