#ifndef POLARSEG_POLARSEG_H
#define POLARSEG_POLARSEG_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define PSG_API __declspec(dllexport)
#else
#define PSG_API __attribute__((visibility("default")))
#endif

typedef enum psg_status {
  PSG_OK = 0,
  PSG_ERR_EMPTY_MASK = 1,
  PSG_ERR_DIMENSION_MISMATCH = 2,
  PSG_ERR_STRIDE_INVALID = 3,
  PSG_ERR_SHAPE_MISMATCH = 4,
  PSG_ERR_NON_POSITIVE_RADIUS = 5,
  PSG_ERR_CONFIG_INVALID = 6,
  PSG_ERR_DIVERGENCE = 7,
  PSG_ERR_IO = 8,
  PSG_ERR_CHECKPOINT_MISMATCH = 9,
  PSG_ERR_INVALID_ARGUMENT = 10,
  PSG_ERR_INTERNAL = 99
} psg_status;

typedef struct psg_config psg_config;
typedef struct psg_model psg_model;

// Called after every optimiser step with the step index (0-based) and the
// mean total loss of the batch.
typedef void (*psg_progress_fn)(size_t step, double total_loss, void* user);

// Message of the most recent failure on the calling thread ("" if none).
PSG_API const char* psg_last_error(void);
PSG_API const char* psg_status_string(psg_status status);

// Strings returned through char** are owned by the caller.
PSG_API void psg_string_free(char* s);

PSG_API psg_status psg_config_new(psg_config** out);
PSG_API psg_status psg_config_load(const char* path, psg_config** out);
PSG_API psg_status psg_config_parse(const char* text, psg_config** out);
PSG_API void psg_config_free(psg_config* config);
// key is "section.name", e.g. "train.alpha".
PSG_API psg_status psg_config_set(psg_config* config, const char* key, const char* value);
PSG_API psg_status psg_config_get(const psg_config* config, const char* key, char** value);
// no-fine, no-hbb, implicit-coarse, detach-coords or standard-conv.
PSG_API psg_status psg_config_ablate(psg_config* config, const char* name);
PSG_API psg_status psg_config_validate(const psg_config* config);
PSG_API psg_status psg_config_to_ini(const psg_config* config, char** ini);

// Dataset directories <out>/train and <out>/eval.
PSG_API psg_status psg_gen_data(const psg_config* config, const char* out_dir);
// data_dir may be NULL to generate the training split from the config.
PSG_API psg_status psg_train(const psg_config* config, const char* data_dir, const char* out_dir,
                             psg_progress_fn progress, void* user);
PSG_API psg_status psg_eval(const psg_config* config, const char* checkpoint, const char* data_dir,
                            const char* out_dir, char** report_table);
PSG_API psg_status psg_infer(const psg_config* config, const char* checkpoint, const char* data_dir,
                             const char* out_dir);
PSG_API psg_status psg_sweep_alpha(const psg_config* config, const char* data_dir, const char* out_dir,
                                   psg_progress_fn progress, void* user, char** table);
// Parameter and MAC manifest as JSON.
PSG_API psg_status psg_count(const psg_config* config, char** manifest_json);

// Inference model (no HBB branch). checkpoint may be NULL for a freshly
// initialised model.
PSG_API psg_status psg_model_load(const psg_config* config, const char* checkpoint, psg_model** out);
PSG_API void psg_model_free(psg_model* model);
PSG_API psg_status psg_model_param_count(const psg_model* model, size_t* count);
// rgb holds three height x width planes with values in [0, 1]. Detections
// are returned as JSON lines.
PSG_API psg_status psg_model_detect(const psg_model* model, const double* rgb, size_t height, size_t width,
                                    char** detections_jsonl);

#ifdef __cplusplus
}
#endif

#endif
