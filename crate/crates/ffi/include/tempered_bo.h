#ifndef TEMPERED_BO_H
#define TEMPERED_BO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible call.
typedef enum TbStatus {
  TB_STATUS_OK = 0,
  TB_STATUS_NULL_POINTER = 1,
  TB_STATUS_INVALID_ARGUMENT = 2,
  TB_STATUS_DOMAIN = 3,
  TB_STATUS_CONFIG = 4,
  TB_STATUS_NUMERICAL = 5,
  TB_STATUS_IO = 6,
  TB_STATUS_BUFFER_TOO_SMALL = 7,
  TB_STATUS_PANIC = 8,
} TbStatus;

// Opaque tempered GP posterior.
typedef struct TbGp TbGp;

// Opaque record of a completed optimization run.
typedef struct TbRun TbRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *tb_version(void);

// Copy the calling thread's last error message into `buf`.
//
// # Safety
// `buf` must be valid for `len` bytes or null; `needed` must be null or writable.
enum TbStatus tb_last_error_message(char *buf, size_t len, size_t *needed);

// `tau_g(v) = E[max(Z - v, 0)^g]` for standard normal `Z`.
//
// # Safety
// `out` must be writable.
enum TbStatus tb_tau(double v, double g, double *out);

// Inverse of `tb_tau` in its first argument.
//
// # Safety
// `out` must be writable.
enum TbStatus tb_tau_inverse(double y, double g, double *out);

// Generalized expected improvement of order `g` with incumbent offset `xi`.
//
// # Safety
// `out` must be writable.
enum TbStatus tb_gei(double mean, double sd, double incumbent, double g, double xi, double *out);

// Build a tempered GP posterior with zero prior mean.
//
// `kernel` is one of `se`, `matern12`, `matern32`, `matern52`. `points` holds
// `n` rows of `dim` coordinates, row-major; `lengthscales` has `dim` entries.
//
// # Safety
// Pointers must be valid for the stated lengths; `out` must be writable.
enum TbStatus tb_gp_create(const char *kernel,
                           size_t dim,
                           const double *lengthscales,
                           double signal_variance,
                           double noise_variance,
                           double alpha,
                           const double *points,
                           const double *y,
                           size_t n,
                           struct TbGp **out);

// Posterior mean and variance at one point of length `dim`.
//
// # Safety
// `gp` must come from `tb_gp_create`; `x` must hold `dim` values.
enum TbStatus tb_gp_predict(const struct TbGp *gp,
                            const double *x,
                            size_t dim,
                            double *mean,
                            double *variance);

// Release a GP handle. Null is ignored.
//
// # Safety
// `gp` must come from `tb_gp_create` and not be used afterwards.
void tb_gp_free(struct TbGp *gp);

// Run an optimization described by a TOML document (same schema as the
// `run` command).
//
// # Safety
// `config_toml` must be NUL-terminated; `out` must be writable.
enum TbStatus tb_run_toml(const char *config_toml, struct TbRun **out);

// Number of evaluations recorded in `run`, or 0 for null.
//
// # Safety
// `run` must come from `tb_run_toml` or be null.
size_t tb_run_len(const struct TbRun *run);

// Input dimension of `run`, or 0 for null.
//
// # Safety
// `run` must come from `tb_run_toml` or be null.
size_t tb_run_dim(const struct TbRun *run);

// Point and observation of evaluation `index` (0-based). `x` receives `dim` values.
//
// # Safety
// `run` must come from `tb_run_toml`; `x` must hold `dim` values.
enum TbStatus tb_run_row(const struct TbRun *run, size_t index, double *x, size_t dim, double *y);

// Best observation of the run.
//
// # Safety
// `run` must come from `tb_run_toml`; `out` must be writable.
enum TbStatus tb_run_best_observed(const struct TbRun *run, double *out);

// Trace CSV of the run. Call with a null buffer to query `needed`.
//
// # Safety
// `buf` must be valid for `len` bytes or null; `needed` must be null or writable.
enum TbStatus tb_run_trace_csv(const struct TbRun *run, char *buf, size_t len, size_t *needed);

// Release a run handle. Null is ignored.
//
// # Safety
// `run` must come from `tb_run_toml` and not be used afterwards.
void tb_run_free(struct TbRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TEMPERED_BO_H */
