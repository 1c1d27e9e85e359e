#ifndef SPECFAIR_H
#define SPECFAIR_H

/* C interface to libspecfair. Every call returns a status code; on failure
 * specfair_last_error() describes the problem (thread-local, valid until the
 * next failing call on the same thread). Handles are opaque and must be
 * released with their _free function. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(SPECFAIR_BUILDING)
#    define SPECFAIR_API __declspec(dllexport)
#  else
#    define SPECFAIR_API __declspec(dllimport)
#  endif
#else
#  define SPECFAIR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum specfair_status {
  SPECFAIR_OK = 0,
  SPECFAIR_E_VOCABULARY_MISMATCH = 1,
  SPECFAIR_E_DEGENERATE_RESIDUAL = 2,
  SPECFAIR_E_INVALID_TEMPERATURE = 3,
  SPECFAIR_E_DOMAIN = 4,
  SPECFAIR_E_INVALID_DISTRIBUTION = 5,
  SPECFAIR_E_INFEASIBLE_SPEC = 6,
  SPECFAIR_E_ENUMERATION_TOO_LARGE = 7,
  SPECFAIR_E_CONFIG = 8,
  SPECFAIR_E_IO = 9,
  SPECFAIR_E_THEOREM_VIOLATION = 10,
  SPECFAIR_E_TRAINING_DIVERGED = 11,
  SPECFAIR_E_INVALID_ARGUMENT = 12,
  SPECFAIR_E_INTERNAL = 13
} specfair_status;

typedef struct specfair_config specfair_config;
typedef struct specfair_model specfair_model;

SPECFAIR_API const char* specfair_version(void);
SPECFAIR_API const char* specfair_status_string(specfair_status status);
SPECFAIR_API const char* specfair_last_error(void);

/* Distribution arithmetic on raw probability vectors of length n. */
SPECFAIR_API specfair_status specfair_acceptance_overlap(const double* p, const double* q,
                                                         size_t n, double* out);
SPECFAIR_API specfair_status specfair_total_variation(const double* p, const double* q, size_t n,
                                                      double* out);
SPECFAIR_API specfair_status specfair_kl_divergence(const double* p, const double* q, size_t n,
                                                    double epsilon, double* out);
SPECFAIR_API specfair_status specfair_cross_entropy(const double* p, const double* q, size_t n,
                                                    double epsilon, double* out);
/* Writes norm(max(p - q, 0)) into out[0..n). */
SPECFAIR_API specfair_status specfair_residual(const double* p, const double* q, size_t n,
                                               double* out);
SPECFAIR_API specfair_status specfair_speedup(double alpha, int gamma, double cost_ratio,
                                              double* out);
SPECFAIR_API specfair_status specfair_unfairness(const double* d, size_t m, double* out);

/* Configuration. */
SPECFAIR_API specfair_status specfair_config_load(const char* path, specfair_config** out);
SPECFAIR_API specfair_status specfair_config_parse(const char* json, specfair_config** out);
/* Seed precedence: explicit seed (has_seed != 0) > SPECFAIR_SEED > config. */
SPECFAIR_API specfair_status specfair_config_resolve_seed(specfair_config* cfg, int has_seed,
                                                          uint64_t seed);
SPECFAIR_API specfair_status specfair_config_set_output_dir(specfair_config* cfg,
                                                            const char* directory);
SPECFAIR_API specfair_status specfair_config_set_train_steps(specfair_config* cfg, size_t steps);
SPECFAIR_API specfair_status specfair_config_set_representation_k(specfair_config* cfg, size_t k);
SPECFAIR_API specfair_status specfair_config_seed(const specfair_config* cfg, uint64_t* out);
/* 16 hex digits plus terminator; buffer needs at least 17 bytes. */
SPECFAIR_API specfair_status specfair_config_hash(const specfair_config* cfg, char* buffer,
                                                  size_t size);
SPECFAIR_API void specfair_config_free(specfair_config* cfg);

/* Tabular models. */
SPECFAIR_API specfair_status specfair_model_load(const char* path, specfair_model** out);
SPECFAIR_API specfair_status specfair_model_save(const specfair_model* model, const char* path);
SPECFAIR_API specfair_status specfair_model_vocab_size(const specfair_model* model, size_t* out);
/* Next-token distribution after `context`; `out` holds vocab_size doubles. */
SPECFAIR_API specfair_status specfair_model_predict(const specfair_model* model,
                                                    const int32_t* context, size_t length,
                                                    double* out, size_t out_size);
SPECFAIR_API void specfair_model_free(specfair_model* model);

/* Experiments. Artifacts go to the config's output directory; a short
 * summary is printed to stdout. */
SPECFAIR_API specfair_status specfair_run_simulate(const specfair_config* cfg, size_t steps,
                                                   int trace);
SPECFAIR_API specfair_status specfair_run_metrics(const specfair_config* cfg,
                                                  double* unfairness_out);
SPECFAIR_API specfair_status specfair_run_verify_theorems(const specfair_config* cfg,
                                                          size_t trials);
SPECFAIR_API specfair_status specfair_run_train_scdf(const specfair_config* cfg);
/* quality_path may be NULL. */
SPECFAIR_API specfair_status specfair_run_sweep_temperature(const specfair_config* cfg,
                                                            const double* temps, size_t n,
                                                            const char* quality_path);
SPECFAIR_API specfair_status specfair_run_balance_data(const specfair_config* cfg,
                                                       const double* grid, size_t n);
SPECFAIR_API specfair_status specfair_run_estimate_representation(const specfair_config* cfg);
SPECFAIR_API specfair_status specfair_run_report(const char* run_dir);

#ifdef __cplusplus
}
#endif

#endif
