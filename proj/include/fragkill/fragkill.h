#ifndef FRAGKILL_H
#define FRAGKILL_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define FK_API __declspec(dllexport)
#else
#define FK_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Values 0-4 double as CLI exit codes. */
typedef enum fk_status {
  FK_OK = 0,
  FK_ERR_CONFIG = 1,      /* invalid input, configuration or I/O */
  FK_ERR_NUMERIC = 2,     /* bracket, drift, convergence or grid failure */
  FK_ERR_CAP = 3,         /* a run hit caps.max_blocks */
  FK_ERR_STATISTICAL = 4, /* a hard acceptance check failed */
  FK_ERR_NULL = 5         /* a required pointer was NULL */
} fk_status;

typedef struct fk_measure fk_measure;
typedef struct fk_model fk_model;
typedef struct fk_scale fk_scale;

/* Message of the last failure on the calling thread; never NULL. */
FK_API const char* fk_last_error(void);

FK_API const char* fk_version(void);

/* Atom i has weight weights[i] and parts parts[offsets[i] .. offsets[i+1]).
   offsets has n_atoms + 1 entries. */
FK_API fk_status fk_measure_create(const double* weights, const double* parts, const size_t* offsets, size_t n_atoms,
                                   fk_measure** out);
FK_API void fk_measure_free(fk_measure* measure);
FK_API fk_status fk_measure_kappa(const fk_measure* measure, double* out);
FK_API fk_status fk_measure_rho(const fk_measure* measure, double* out);
FK_API fk_status fk_phi(const fk_measure* measure, double p, double* out);
FK_API fk_status fk_phi_prime(const fk_measure* measure, double p, double* out);

FK_API fk_status fk_model_create(const fk_measure* measure, double c, fk_model** out);
FK_API void fk_model_free(fk_model* model);
FK_API fk_status fk_model_p_bar(const fk_model* model, double* out);
FK_API fk_status fk_model_c_p_bar(const fk_model* model, double* out);
FK_API fk_status fk_psi_tilted(const fk_model* model, double p, double lambda, double* out);

FK_API fk_status fk_scale_create(const fk_model* model, double p, double h, double x_max, fk_scale** out);
FK_API void fk_scale_free(fk_scale* scale);
/* W_p(x); beyond x_max returns the asymptote and sets *beyond to 1. */
FK_API fk_status fk_scale_eval(const fk_scale* scale, double x, double* out, int* beyond);
/* Tilted-spine survival (psi_p'(0+) v 0) W_p(x). scale may be NULL when
   c <= phi'(p); otherwise it must be the table for the same p. */
FK_API fk_status fk_spine_survival(const fk_model* model, const fk_scale* scale, double p, double x, double* out);

/* Optional overrides for the run entry points; NULL leaves the config as is. */
typedef struct fk_overrides {
  int has_seed;
  uint64_t seed;
  int has_trials;
  size_t trials;
  int has_horizon;
  double horizon;
  unsigned threads; /* 0 means 1 */
} fk_overrides;

/* The run entry points return the command's exit code (0-4). */
FK_API int fk_run_compute(const char* config_path, const char* out_path);
FK_API int fk_run_simulate(const char* config_path, const char* out_path, const fk_overrides* overrides);
FK_API int fk_run_experiment(const char* name, const char* config_path, const char* out_path,
                             const fk_overrides* overrides);

/* Comma-separated experiment names. Release with fk_string_free. */
FK_API char* fk_experiment_names(void);
FK_API void fk_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif
