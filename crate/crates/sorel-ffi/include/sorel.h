#ifndef SOREL_H
#define SOREL_H

/* Generated by cbindgen from the sorel-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum sorel_status {
  SOREL_STATUS_OK = 0,
  SOREL_STATUS_NULL_POINTER = 1,
  SOREL_STATUS_INVALID_ARGUMENT = 2,
  SOREL_STATUS_LENGTH_MISMATCH = 3,
  SOREL_STATUS_NOT_IN_PERMUTAHEDRON = 4,
  SOREL_STATUS_DIVERGED = 5,
  SOREL_STATUS_TOLERANCE_NOT_REACHED = 6,
  SOREL_STATUS_IO_ERROR = 7,
  SOREL_STATUS_INTERNAL_ERROR = 8,
} sorel_status;

// Loss family selector for [`sorel_model_new`].
typedef enum sorel_loss {
  SOREL_LOSS_LEAST_SQUARES = 0,
  SOREL_LOSS_LOGISTIC = 1,
} sorel_loss;

// Which optimizer [`sorel_optimize`] runs.
typedef enum sorel_method {
  // Stabilized primal-dual with the tuned schedule (`c`, `alpha`).
  SOREL_METHOD_SOREL_PRACTICAL = 0,
  // Stabilized primal-dual with the guarantee-carrying schedule and
  // exact inner solves (`c`, `alpha` ignored).
  SOREL_METHOD_SOREL_THEORETICAL = 1,
  // Minibatch SGD with the batch-local spectrum (`alpha` = step size,
  // `c` = batch size).
  SOREL_METHOD_SGD = 2,
  // LSVRG with epoch length n (`alpha` = step size).
  SOREL_METHOD_LSVRG = 3,
  // Prospect-style gradient-table method (`alpha` = step size).
  SOREL_METHOD_PROSPECT = 4,
} sorel_method;

// Opaque objective: dataset + loss family + ridge regularizer.
typedef struct sorel_model sorel_model;

// Opaque result of an optimizer run: the final iterate plus the recorded
// trace rows.
typedef struct sorel_run sorel_run;

// Opaque spectral weight vector.
typedef struct sorel_weights sorel_weights;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the calling thread's most recent error. The pointer
// stays valid until the next failing call on the same thread.
const char *sorel_last_error_message(void);

enum sorel_status sorel_weights_cvar(size_t n, double alpha, struct sorel_weights **out);

enum sorel_status sorel_weights_esrm(size_t n, double rho, struct sorel_weights **out);

enum sorel_status sorel_weights_extremile(size_t n, double r, struct sorel_weights **out);

enum sorel_status sorel_weights_custom(const double *values, size_t n, struct sorel_weights **out);

// Number of weights in the vector; 0 for a null handle.
size_t sorel_weights_len(const struct sorel_weights *weights);

// Copies the weights into `out` (length `len`, which must equal
// `sorel_weights_len`).
enum sorel_status sorel_weights_values(const struct sorel_weights *weights,
                                       double *out,
                                       size_t len);

// # Safety
// `weights` must be a handle returned by this library, freed at most once.
void sorel_weights_free(struct sorel_weights *weights);

// Spectral risk of a loss vector: the weight-sorted-loss dot product.
enum sorel_status sorel_spectral_risk(const struct sorel_weights *weights,
                                      const double *losses,
                                      size_t n,
                                      double *out);

// Euclidean projection onto the permutahedron of `weights`; writes the
// projected point into `out` (length `n`).
enum sorel_status sorel_permutahedron_project(const struct sorel_weights *weights,
                                              const double *point,
                                              size_t n,
                                              double *out);

// Vertex of the permutahedron maximizing `<lambda, scores>`.
enum sorel_status sorel_permutahedron_lmo(const struct sorel_weights *weights,
                                          const double *scores,
                                          size_t n,
                                          double *out);

// Membership test at tolerance `tol`; writes 1 or 0 into `out`.
enum sorel_status sorel_permutahedron_contains(const struct sorel_weights *weights,
                                               const double *point,
                                               size_t n,
                                               double tol,
                                               int32_t *out);

// Isotonic regression of `y` into `out` (length `n`); nonzero
// `nonincreasing` selects the decreasing direction.
enum sorel_status sorel_isotonic_regression(const double *y,
                                            size_t n,
                                            int32_t nonincreasing,
                                            double *out);

// Builds a model from a row-major `n x d` feature matrix, `n` targets, the
// loss family, and the regularization modulus `mu`.
enum sorel_status sorel_model_new(const double *features,
                                  const double *targets,
                                  size_t n,
                                  size_t d,
                                  enum sorel_loss loss,
                                  double mu,
                                  struct sorel_model **out);

// # Safety
// `model` must be a handle returned by this library, freed at most once.
void sorel_model_free(struct sorel_model *model);

// Composite objective (spectral risk + regularizer) at `w` (length `d`).
enum sorel_status sorel_model_objective(const struct sorel_model *model,
                                        const struct sorel_weights *weights,
                                        const double *w,
                                        size_t d,
                                        double *out);

// Runs an optimizer from the zero start under a pass budget. `c` and
// `alpha` are method-specific (see [`SorelMethod`]); pass 0 for defaults.
enum sorel_status sorel_optimize(const struct sorel_model *model,
                                 const struct sorel_weights *weights,
                                 enum sorel_method method,
                                 double pass_budget,
                                 double c,
                                 double alpha,
                                 uint64_t seed,
                                 struct sorel_run **out);

// High-accuracy reference minimizer with a certified objective gap `tol`;
// writes the minimizer into `out` (length `d`).
enum sorel_status sorel_reference_solution(const struct sorel_model *model,
                                           const struct sorel_weights *weights,
                                           double tol,
                                           double *out,
                                           size_t d);

// Dimension of the run's final iterate.
size_t sorel_run_dim(const struct sorel_run *run);

// Copies the final iterate into `out` (length `d`).
enum sorel_status sorel_run_final_iterate(const struct sorel_run *run, double *out, size_t d);

// Number of recorded trace rows.
size_t sorel_run_trace_len(const struct sorel_run *run);

// Reads one trace row; any of the out-pointers may be null to skip that
// field.
enum sorel_status sorel_run_trace_row(const struct sorel_run *run,
                                      size_t index,
                                      double *passes,
                                      double *seconds,
                                      double *objective);

// # Safety
// `run` must be a handle returned by this library, freed at most once.
void sorel_run_free(struct sorel_run *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SOREL_H */
