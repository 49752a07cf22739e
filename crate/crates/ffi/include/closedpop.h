#ifndef CLOSEDPOP_H
#define CLOSEDPOP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ClosedpopStatus {
  CLOSEDPOP_STATUS_OK = 0,
  CLOSEDPOP_STATUS_NULL_POINTER = 1,
  CLOSEDPOP_STATUS_INVALID_UTF8 = 2,
  CLOSEDPOP_STATUS_PARSE = 3,
  CLOSEDPOP_STATUS_MODEL = 4,
  CLOSEDPOP_STATUS_DIMENSION = 5,
  CLOSEDPOP_STATUS_NO_CONVERGENCE = 6,
  CLOSEDPOP_STATUS_INVALID_ARGUMENT = 7,
  CLOSEDPOP_STATUS_INTERNAL = 8,
} ClosedpopStatus;

/**
 * Parsed encounter histories with their sufficient statistics.
 */
typedef struct ClosedpopDataset ClosedpopDataset;

/**
 * A fitted model.
 */
typedef struct ClosedpopFit ClosedpopFit;

/**
 * Headline numbers of a fit. Interval ends are NaN when unavailable.
 */
typedef struct ClosedpopFitSummary {
  double n_hat;
  double n_lower;
  double n_upper;
  double log_lik;
  double aic;
  size_t n_params;
  bool boundary;
  double gof_x2;
  int64_t gof_df;
  double gof_p;
} ClosedpopFitSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *closedpop_last_error(void);

/**
 * Parses encounter histories (one per line) with `states` states.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ClosedpopStatus closedpop_dataset_parse(const char *text,
                                             size_t states,
                                             struct ClosedpopDataset **out);

/**
 * # Safety
 * `dataset` must come from [`closedpop_dataset_parse`] or be NULL.
 */
void closedpop_dataset_free(struct ClosedpopDataset *dataset);

/**
 * Number of individuals, occasions and states.
 *
 * # Safety
 * `dataset` must be a live handle; the output pointers must be valid.
 */
enum ClosedpopStatus closedpop_dataset_dims(const struct ClosedpopDataset *dataset,
                                            size_t *n,
                                            size_t *occasions,
                                            size_t *states);

/**
 * Sufficient statistics as JSON. Free the string with [`closedpop_string_free`].
 *
 * # Safety
 * `dataset` must be a live handle and `out` a valid pointer.
 */
enum ClosedpopStatus closedpop_stats_json(const struct ClosedpopDataset *dataset, char **out);

/**
 * Fits `model` (e.g. `"Mh^2"`) by maximum likelihood, unconditional unless
 * `conditional` is set. `starts` of 0 means the default.
 *
 * # Safety
 * `dataset` must be a live handle, `model` a NUL-terminated string and
 * `out` a valid pointer.
 */
enum ClosedpopStatus closedpop_fit(const struct ClosedpopDataset *dataset,
                                   const char *model,
                                   bool conditional,
                                   uint64_t seed,
                                   size_t starts,
                                   struct ClosedpopFit **out);

/**
 * # Safety
 * `fit` must come from [`closedpop_fit`] or be NULL.
 */
void closedpop_fit_free(struct ClosedpopFit *fit);

/**
 * # Safety
 * `fit` must be a live handle and `out` a valid pointer.
 */
enum ClosedpopStatus closedpop_fit_summary(const struct ClosedpopFit *fit,
                                           struct ClosedpopFitSummary *out);

/**
 * Looks up a reported parameter by name (`"N"`, `"p(1)"`, `"psi(1,2)"`, ...).
 * `se` is NaN when unavailable.
 *
 * # Safety
 * `fit` must be a live handle, `name` a NUL-terminated string and the
 * output pointers valid.
 */
enum ClosedpopStatus closedpop_fit_param(const struct ClosedpopFit *fit,
                                         const char *name,
                                         double *estimate,
                                         double *se);

/**
 * Full fit as JSON. Free the string with [`closedpop_string_free`].
 *
 * # Safety
 * `fit` must be a live handle and `out` a valid pointer.
 */
enum ClosedpopStatus closedpop_fit_json(const struct ClosedpopFit *fit, char **out);

/**
 * # Safety
 * `s` must come from this library or be NULL.
 */
void closedpop_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CLOSEDPOP_H */
