#ifndef HDSAC_H
#define HDSAC_H

/*
 * C interface of the hdsac shared library.
 *
 * Every call returns an hdsac_status. On failure, hdsac_last_error() gives a
 * message for the calling thread, valid until that thread's next call.
 * Handles are opaque and owned by the caller; free them with the matching
 * *_free function (passing NULL is allowed).
 *
 * Functions returning text use caller buffers: pass buf == NULL to query the
 * required size (including the terminating NUL) through *needed; a non-NULL
 * buffer that is too small yields HDSAC_ERR_BUFFER_TOO_SMALL.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define HDSAC_API __declspec(dllexport)
#else
#define HDSAC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hdsac_status {
    HDSAC_OK = 0,
    HDSAC_ERR_INVALID_ARGUMENT = 1,
    HDSAC_ERR_CONFIG = 2,       /* bad value, unknown key, usage error */
    HDSAC_ERR_FORMAT = 3,       /* malformed or version-mismatched file */
    HDSAC_ERR_IO = 4,
    HDSAC_ERR_DIVERGENCE = 5,   /* training diverged; message names the snapshot */
    HDSAC_ERR_CONTRACT = 6,     /* precondition violated inside the library */
    HDSAC_ERR_BUFFER_TOO_SMALL = 7,
    HDSAC_ERR_INTERNAL = 8
} hdsac_status;

typedef enum hdsac_algorithm { HDSAC_ALGO_HDSAC = 0, HDSAC_ALGO_SAC = 1, HDSAC_ALGO_PVP = 2 } hdsac_algorithm;

typedef struct hdsac_config hdsac_config;
typedef struct hdsac_agent hdsac_agent;

/* Receives one line of text (no trailing newline). */
typedef void (*hdsac_line_fn)(const char* line, void* user);

HDSAC_API const char* hdsac_version(void);
HDSAC_API const char* hdsac_last_error(void);
HDSAC_API const char* hdsac_status_name(hdsac_status status);

/* ---- configuration ---------------------------------------------------- */

HDSAC_API hdsac_status hdsac_config_new(hdsac_config** out);
HDSAC_API hdsac_status hdsac_config_load(const char* path, hdsac_config** out);
HDSAC_API hdsac_status hdsac_config_parse(const char* text, hdsac_config** out);
HDSAC_API hdsac_status hdsac_config_clone(const hdsac_config* cfg, hdsac_config** out);
HDSAC_API void hdsac_config_free(hdsac_config* cfg);

/* key is "section.key", e.g. "algo.gamma" or "run.seed". */
HDSAC_API hdsac_status hdsac_config_set(hdsac_config* cfg, const char* key, const char* value);
HDSAC_API hdsac_status hdsac_config_get(const hdsac_config* cfg, const char* key, char* buf, size_t cap, size_t* needed);
HDSAC_API hdsac_status hdsac_config_validate(const hdsac_config* cfg);
HDSAC_API hdsac_status hdsac_config_serialize(const hdsac_config* cfg, char* buf, size_t cap, size_t* needed);
HDSAC_API hdsac_status hdsac_config_save(const hdsac_config* cfg, const char* path);
HDSAC_API size_t hdsac_config_key_count(void);
/* NULL when index is out of range. */
HDSAC_API const char* hdsac_config_key(size_t index);
/* Directory a training run with this configuration writes to. */
HDSAC_API hdsac_status hdsac_config_run_dir(const hdsac_config* cfg, char* buf, size_t cap, size_t* needed);

/* Configuration to re-run a recorded session (config_path may be NULL). */
HDSAC_API hdsac_status hdsac_replay_config(const char* session_path, const char* config_path, hdsac_config** out);
/* Configuration stored with a checkpoint, defaults when it has none. */
HDSAC_API hdsac_status hdsac_checkpoint_config(const char* checkpoint_dir, hdsac_config** out);

/* ---- training ----------------------------------------------------------- */

typedef struct hdsac_summary {
    hdsac_algorithm algorithm;
    int64_t human_data;
    int64_t total_data;
    double training_safety_cost;
    int has_eval; /* the fields below are valid when non-zero */
    double return_mean;
    double return_std;
    double episodic_safety_cost;
    double success_rate;
} hdsac_summary;

/* Trains into the configured run directory. on_metrics (may be NULL) sees
 * every metrics record as it is written. */
HDSAC_API hdsac_status hdsac_train(const hdsac_config* cfg, hdsac_line_fn on_metrics, void* user, hdsac_summary* out);

HDSAC_API hdsac_status hdsac_summary_header(char* buf, size_t cap, size_t* needed);
HDSAC_API hdsac_status hdsac_summary_row(const hdsac_summary* s, char* buf, size_t cap, size_t* needed);

/* ---- evaluation --------------------------------------------------------- */

typedef struct hdsac_eval_summary {
    size_t episodes;
    double return_mean;
    double return_std; /* population standard deviation */
    double episodic_safety_cost;
    double success_rate;
} hdsac_eval_summary;

/* checkpoint_dir == NULL evaluates the scripted expert. on_record (may be
 * NULL) receives one JSON record per episode, then the summary record. */
HDSAC_API hdsac_status hdsac_evaluate(const hdsac_config* cfg, const char* checkpoint_dir, const uint64_t* seeds,
                                      size_t n_seeds, hdsac_line_fn on_record, void* user, hdsac_eval_summary* out);

/* Parses "1,2,5-9"; *count receives the number of seeds, which are written
 * when they fit in cap. */
HDSAC_API hdsac_status hdsac_parse_seeds(const char* text, uint64_t* seeds, size_t cap, size_t* count);

/* ---- agents ------------------------------------------------------------- */

HDSAC_API hdsac_status hdsac_agent_load(const char* checkpoint_dir, const hdsac_config* cfg, hdsac_agent** out);
HDSAC_API void hdsac_agent_free(hdsac_agent* agent);
HDSAC_API size_t hdsac_agent_obs_dim(const hdsac_agent* agent);
/* Deterministic action for an observation of hdsac_agent_obs_dim floats. */
HDSAC_API hdsac_status hdsac_agent_act(const hdsac_agent* agent, const float* obs, size_t n, double* steer, double* accel);

/* ---- plots -------------------------------------------------------------- */

/* Overlays the runs (labels may be NULL: file names are used) and writes
 * SVG and TSV files to out_dir; on_file receives each written path. */
HDSAC_API hdsac_status hdsac_plot(const char* const* metrics_paths, const char* const* labels, size_t n_runs,
                                  const char* out_dir, hdsac_line_fn on_file, void* user);

#ifdef __cplusplus
}
#endif

#endif /* HDSAC_H */
