#ifndef THRESHREG_H
#define THRESHREG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

#define TR_PENALTY_HARD 0

#define TR_PENALTY_L0 1

#define TR_PENALTY_SICA 2

#define TR_PENALTY_LASSO 3

#define TR_TARGET_L2 0

#define TR_TARGET_PREDICTION 1

// Result of every fallible call.
typedef enum TrStatus {
  TR_STATUS_OK = 0,
  TR_STATUS_NULL_POINTER = 1,
  TR_STATUS_INVALID_ARGUMENT = 2,
  TR_STATUS_DATA = 3,
  TR_STATUS_NUMERICAL = 4,
  TR_STATUS_OUT_OF_RANGE = 5,
  TR_STATUS_PANIC = 6,
} TrStatus;

// Design matrix and response on the working (rescaled) column scale.
typedef struct TrData TrData;

// One penalized fit.
typedef struct TrFit TrFit;

// A regularization path.
typedef struct TrPath TrPath;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or NULL. Valid until the next
// failing call on the same thread.
const char *tr_last_error(void);

// Library version as a static NUL-terminated string.
const char *tr_version(void);

// Releases a string returned by this library. NULL is ignored.
void tr_string_free(char *s);

// Minimizer of `(z - t)^2 / 2 + p(|t|)` over `t`. `shape_a` is used by SICA only.
enum TrStatus tr_univariate_minimize(uint32_t penalty,
                                     double lambda,
                                     double shape_a,
                                     double z,
                                     double *out_value,
                                     bool *out_thresholded);

// Penalty value `p(t)` for `t >= 0`.
enum TrStatus tr_penalty_value(uint32_t penalty,
                               double lambda,
                               double shape_a,
                               double t,
                               double *out);

// Builds a data set from a row-major `n x p` matrix and a length-`n` response.
// With `center` the columns and response are centered (fits get an intercept).
// Columns are rescaled to norm `sqrt(n)`.
enum TrStatus tr_data_new(size_t n,
                          size_t p,
                          const double *x_row_major,
                          const double *y,
                          bool center,
                          struct TrData **out);

void tr_data_free(struct TrData *data);

size_t tr_data_n(const struct TrData *data);

size_t tr_data_p(const struct TrData *data);

// Fits one penalty at one `lambda`, starting from zero. `shape_a <= 0`
// selects the default SICA shape.
enum TrStatus tr_fit(const struct TrData *data,
                     uint32_t penalty,
                     double lambda,
                     double shape_a,
                     struct TrFit **out);

void tr_fit_free(struct TrFit *fit);

// Number of nonzero coefficients.
size_t tr_fit_support_size(const struct TrFit *fit);

// Copies the 0-based support indices into `out`, which holds `len` entries.
enum TrStatus tr_fit_support(const struct TrFit *fit, size_t *out, size_t len);

// Copies the `p` coefficients on the original column scale into `out`.
enum TrStatus tr_fit_coefficients(const struct TrFit *fit, double *out, size_t len);

// Intercept on the original scale (0 for uncentered data).
double tr_fit_intercept(const struct TrFit *fit);

// Penalized objective on the working scale.
double tr_fit_objective(const struct TrFit *fit);

bool tr_fit_converged(const struct TrFit *fit);

// JSON export of the fit; release with `tr_string_free`.
enum TrStatus tr_fit_to_json(const struct TrFit *fit, char **out);

// Solves the path over `grid` (decreasing, `grid_len` values), or over the
// default automatic grid when `grid` is NULL.
enum TrStatus tr_path(const struct TrData *data,
                      uint32_t penalty,
                      double shape_a,
                      const double *grid,
                      size_t grid_len,
                      struct TrPath **out);

void tr_path_free(struct TrPath *path);

// Number of fitted grid points (the path stops early at the support cap).
size_t tr_path_len(const struct TrPath *path);

// Borrowed fit at position `index`, valid while the path lives, or NULL.
const struct TrFit *tr_path_fit(const struct TrPath *path, size_t index);

double tr_path_lambda(const struct TrPath *path, size_t index);

// JSON export of the whole path; release with `tr_string_free`.
enum TrStatus tr_path_to_json(const struct TrPath *path, char **out);

// Ridge refit on `support` (`support_len` sorted column indices). Writes
// the `p` coefficients on the original column scale into `out` and the
// intercept into `out_intercept` when it is non-null.
enum TrStatus tr_ridge_refit(const struct TrData *data,
                             const size_t *support,
                             size_t support_len,
                             double lambda1,
                             double *out,
                             size_t len,
                             double *out_intercept);

// Risk-minimizing ridge parameter of the model with eigenvalues `d` of
// `X0'X0` and rotated coefficients `b` (both of length `s`).
enum TrStatus tr_optimal_ridge(const double *d,
                               const double *b,
                               size_t s,
                               double sigma,
                               uint32_t target,
                               double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* THRESHREG_H */
