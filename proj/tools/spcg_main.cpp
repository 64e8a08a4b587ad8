// Command-line front end; links the C API only.

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spcg/spcg.h"

namespace {

struct CommonArgs {
  std::string config;
  std::string preset;
  std::string output;
  std::int64_t seed = -1;
  bool deterministic = false;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config, "Path to an experiment config JSON file");
  cmd->add_option("--preset", args.preset,
                  "Named preset (stare2drive, drive2stare, ct2mr, mr2ct, synth_desk)");
  cmd->add_option("--output", args.output, "Output directory (overrides the config)");
  cmd->add_option("--seed", args.seed, "Master seed (overrides the config)");
  cmd->add_flag("--deterministic", args.deterministic, "Force deterministic execution");
  cmd->add_option("--set", args.overrides,
                  "Extra config override as key=value (repeatable), e.g. "
                  "--set gan_train.total_epochs=5");
}

int fail(spcg_status status, const char* message) {
  std::fprintf(stderr, "error (%s): %s\n", spcg_status_name(status), message);
  switch (status) {
    case SPCG_ERROR_CONFIG: return 2;
    case SPCG_ERROR_DATA: return 3;
    case SPCG_ERROR_TRAINING: return 4;
    default: return 1;
  }
}

int open_experiment(const CommonArgs& args, spcg_experiment** exp) {
  spcg_status status;
  if (!args.config.empty()) {
    status = spcg_experiment_open(args.config.c_str(), exp);
  } else if (!args.preset.empty()) {
    status = spcg_experiment_open_preset(args.preset.c_str(), exp);
  } else {
    std::fprintf(stderr, "error: pass --config PATH or --preset NAME\n");
    return 2;
  }
  if (status != SPCG_OK) return fail(status, spcg_last_error());

  if (!args.output.empty()) spcg_experiment_override(*exp, "output", args.output.c_str());
  if (args.seed >= 0) {
    spcg_experiment_override(*exp, "seed", std::to_string(args.seed).c_str());
  }
  if (args.deterministic) spcg_experiment_override(*exp, "deterministic", "true");
  for (const std::string& kv : args.overrides) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
      spcg_experiment_close(*exp);
      return 2;
    }
    spcg_experiment_override(*exp, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
  }
  return 0;
}

int run_stage(const CommonArgs& args, const std::string& stage) {
  spcg_experiment* exp = nullptr;
  if (int rc = open_experiment(args, &exp); rc != 0) return rc;
  const spcg_status status = spcg_experiment_run(exp, stage.c_str());
  int rc = 0;
  if (status != SPCG_OK) {
    rc = fail(status, spcg_experiment_error(exp));
  } else {
    std::printf("%s\n", spcg_experiment_summary(exp));
  }
  spcg_experiment_close(exp);
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structure-preserving Cycle-GAN domain adaptation pipeline"};
  app.require_subcommand(1);

  CommonArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "Generate the two-domain synthetic dataset");
  add_common(synth, synth_args);

  CommonArgs run_args;
  std::string stage = "all";
  CLI::App* run = app.add_subcommand("run", "Run pipeline stages");
  add_common(run, run_args);
  run->add_option("--stage", stage, "synth | train_da | translate | train_seg | eval | all")
      ->default_val("all");

  CLI::App* version = app.add_subcommand("version", "Print the library version");

  CLI11_PARSE(app, argc, argv);

  if (version->parsed()) {
    std::printf("spcg %s\n", spcg_version());
    return 0;
  }
  if (synth->parsed()) return run_stage(synth_args, "synth");
  return run_stage(run_args, stage);
}
