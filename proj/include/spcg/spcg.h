/*
 * C interface to the SP Cycle-GAN domain-adaptation pipeline.
 *
 * Usage: open an experiment from a config file, JSON text or named preset,
 * optionally apply dotted-key overrides, then run pipeline stages. All
 * functions return SPCG_OK on success; on failure the experiment handle
 * stores a human-readable message retrievable via spcg_experiment_error().
 */
#ifndef SPCG_SPCG_H
#define SPCG_SPCG_H

#ifdef __cplusplus
extern "C" {
#endif

typedef enum spcg_status {
  SPCG_OK = 0,
  SPCG_ERROR_CONFIG = 2,    /* malformed or inconsistent configuration */
  SPCG_ERROR_DATA = 3,      /* dataset, shape or validation problems */
  SPCG_ERROR_TRAINING = 4,  /* non-finite losses, aborted runs */
  SPCG_ERROR_INVALID_ARGUMENT = 5,
  SPCG_ERROR_INTERNAL = 6
} spcg_status;

typedef struct spcg_experiment spcg_experiment;

const char* spcg_version(void);
const char* spcg_status_name(spcg_status status);

/* Constructors. On failure *out is NULL and the global last-error message is
 * set (spcg_last_error). */
spcg_status spcg_experiment_open(const char* config_path, spcg_experiment** out);
spcg_status spcg_experiment_open_json(const char* config_json, spcg_experiment** out);
spcg_status spcg_experiment_open_preset(const char* preset_name, spcg_experiment** out);

/* Dotted config key override, e.g. ("gan_train.total_epochs", "5") or
 * ("seed", "7"). Values are parsed as JSON when possible. Overrides apply to
 * every later spcg_experiment_run call. */
spcg_status spcg_experiment_override(spcg_experiment* exp, const char* key, const char* value);

/* stage: synth | train_da | translate | train_seg | eval | all */
spcg_status spcg_experiment_run(spcg_experiment* exp, const char* stage);

/* Human-readable summary of the last successful run ("" if none). Owned by
 * the experiment; valid until the next call on the same handle. */
const char* spcg_experiment_summary(const spcg_experiment* exp);

/* Message of the last failure on this handle ("" if none). */
const char* spcg_experiment_error(const spcg_experiment* exp);

/* Message of the last constructor failure on this thread ("" if none). */
const char* spcg_last_error(void);

void spcg_experiment_close(spcg_experiment* exp);

#ifdef __cplusplus
}
#endif

#endif /* SPCG_SPCG_H */
