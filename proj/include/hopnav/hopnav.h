#ifndef HOPNAV_H
#define HOPNAV_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define HOPNAV_API __declspec(dllexport)
#else
#define HOPNAV_API __attribute__((visibility("default")))
#endif

typedef enum hopnav_status {
  HOPNAV_OK = 0,
  HOPNAV_INVALID_ARGUMENT = 1,
  HOPNAV_NO_TOUCHDOWN = 2,
  HOPNAV_LEG_COLLAPSE = 3,
  HOPNAV_GROUND_PENETRATION = 4,
  HOPNAV_INTERSTITIAL_MISSED = 5,
  HOPNAV_EXHAUSTED_SAMPLING = 6,
  HOPNAV_DIVERGED = 7,
  HOPNAV_SINGULAR_KERNEL = 8,
  HOPNAV_NON_TILING = 9,
  HOPNAV_PARSE_ERROR = 10,
  HOPNAV_NONDETERMINISTIC_TRANSITION = 11,
  HOPNAV_UNKNOWN_STATE_REFERENCE = 12,
  HOPNAV_ALPHABET_MISMATCH = 13,
  HOPNAV_NON_CONVERGENCE = 14,
  HOPNAV_INITIAL_STATE_VIOLATING = 15,
  HOPNAV_NO_ELIGIBLE_ACTION = 16,
  HOPNAV_SATISFACTION_UNREACHABLE = 17,
  HOPNAV_CONFIG_ERROR = 18,
  HOPNAV_IO_ERROR = 19,
  HOPNAV_INTERNAL_ERROR = 99
} hopnav_status;

typedef struct hopnav_model hopnav_model;
typedef struct hopnav_runner hopnav_runner;
typedef struct hopnav_env hopnav_env;
typedef struct hopnav_config hopnav_config;
typedef struct hopnav_logs hopnav_logs;
typedef struct hopnav_sweep hopnav_sweep;

/* Message of the last failed call on this thread ("" if none). */
HOPNAV_API const char* hopnav_last_error(void);
HOPNAV_API const char* hopnav_status_name(int status);

/* Strings returned through char** are owned by the caller. */
HOPNAV_API void hopnav_string_free(char* s);

/* ---- hop model ---- */

typedef struct hopnav_train_options {
  size_t samples;    /* simulated hops, default 20000 */
  uint64_t seed;     /* data and initialization seed */
  int epochs;        /* default 300 */
  size_t probes;     /* round-trip targets for the control error, default 500 */
} hopnav_train_options;

typedef struct hopnav_model_info {
  uint64_t sample_count;
  double final_loss;
  double validation_rmse;
  double control_error;
} hopnav_model_info;

HOPNAV_API void hopnav_train_options_default(hopnav_train_options* options);
HOPNAV_API int hopnav_model_train(const hopnav_train_options* options, hopnav_model** out);
HOPNAV_API int hopnav_model_load(const char* path, hopnav_model** out);
HOPNAV_API int hopnav_model_save(const hopnav_model* model, const char* path);
HOPNAV_API int hopnav_model_info_get(const hopnav_model* model, hopnav_model_info* out);
/* Round-trip errors over `count` targets; stores the 90th percentile as the
 * model's control error and optionally reports the pass fraction at `tol`. */
HOPNAV_API int hopnav_model_measure(hopnav_model* model, size_t count, uint64_t seed, double tol, double* p90,
                                    double* pass_fraction);
HOPNAV_API void hopnav_model_destroy(hopnav_model* model);

/* ---- runner (model plus steady gait) ---- */

/* `gait_cache` may be NULL; otherwise the gait is read from it when present
 * and written to it after a search. */
HOPNAV_API int hopnav_runner_create(const hopnav_model* model, double speed, const char* gait_cache,
                                    hopnav_runner** out);
HOPNAV_API void hopnav_runner_destroy(hopnav_runner* runner);

/* ---- environment ---- */

/* Builtin names: "case-a", "case-b", "micro". */
HOPNAV_API int hopnav_env_builtin(const char* name, hopnav_env** out);
HOPNAV_API int hopnav_env_load(const char* path, hopnav_env** out);
HOPNAV_API int hopnav_env_from_json(const char* json, hopnav_env** out);
HOPNAV_API int hopnav_env_to_json(const hopnav_env* env, char** out);
HOPNAV_API void hopnav_env_destroy(hopnav_env* env);

/* ---- run configuration ---- */

HOPNAV_API int hopnav_config_create(hopnav_config** out);
HOPNAV_API int hopnav_config_load(const char* path, hopnav_config** out);
HOPNAV_API int hopnav_config_from_json(const char* json, hopnav_config** out);
HOPNAV_API int hopnav_config_to_json(const hopnav_config* config, char** out);
/* Keys follow the JSON field names, e.g. "p_sat", "seed", "batch". */
HOPNAV_API int hopnav_config_set_number(hopnav_config* config, const char* key, double value);
HOPNAV_API int hopnav_config_set_string(hopnav_config* config, const char* key, const char* value);
HOPNAV_API int hopnav_config_get_number(const hopnav_config* config, const char* key, double* out);
HOPNAV_API void hopnav_config_destroy(hopnav_config* config);

/* ---- episodes ---- */

typedef enum hopnav_outcome {
  HOPNAV_SATISFIED = 0,
  HOPNAV_VIOLATED = 1,
  HOPNAV_STEP_CAP = 2
} hopnav_outcome;

typedef struct hopnav_run_summary {
  uint64_t seed;
  int run_index;
  int outcome; /* hopnav_outcome */
  int steps;
  int switch_step;
  int backups;
  double total_reward;
} hopnav_run_summary;

/* Runs config.runs episodes; reward knowledge carries over in unknown mode. */
HOPNAV_API int hopnav_run_experiment(const hopnav_runner* runner, const hopnav_env* env,
                                     const hopnav_config* config, hopnav_logs** out);
HOPNAV_API size_t hopnav_logs_count(const hopnav_logs* logs);
HOPNAV_API int hopnav_logs_summary(const hopnav_logs* logs, size_t index, hopnav_run_summary* out);
HOPNAV_API int hopnav_logs_to_json(const hopnav_logs* logs, size_t index, char** out);
/* Reads a log_<i>.json file as a one-entry collection. */
HOPNAV_API int hopnav_logs_load(const char* path, hopnav_logs** out);
HOPNAV_API int hopnav_logs_emit(const hopnav_logs* logs, const hopnav_env* env, const char* directory);
HOPNAV_API int hopnav_render_svg(const hopnav_logs* logs, size_t index, const hopnav_env* env, const char* path);
HOPNAV_API void hopnav_logs_destroy(hopnav_logs* logs);

/* ---- switching-parameter sweep ---- */

typedef struct hopnav_sweep_cell {
  double p;
  double eps;
  int runs;
  int completed;
  double mean_reward; /* NaN when no run completed */
  double mean_steps;
} hopnav_sweep_cell;

HOPNAV_API int hopnav_sweep_run(const hopnav_runner* runner, const hopnav_env* env, const hopnav_config* config,
                                const double* p_values, size_t p_count, const double* eps_values, size_t eps_count,
                                int runs, hopnav_sweep** out);
HOPNAV_API int hopnav_sweep_cell_get(const hopnav_sweep* sweep, size_t ip, size_t ie, hopnav_sweep_cell* out);
HOPNAV_API int hopnav_sweep_emit(const hopnav_sweep* sweep, const char* directory);
HOPNAV_API void hopnav_sweep_destroy(hopnav_sweep* sweep);

/* ---- trade-off bounds ---- */

typedef struct hopnav_bounds {
  double m_switch;
  double m_ltl;
  double rl_proportion;
} hopnav_bounds;

HOPNAV_API int hopnav_tradeoff_bounds(double c, double eps, double product_size, hopnav_bounds* out);

#ifdef __cplusplus
}
#endif

#endif
