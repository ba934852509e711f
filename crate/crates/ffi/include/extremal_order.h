#ifndef EXTREMAL_ORDER_H
#define EXTREMAL_ORDER_H

/* Generated by cbindgen from the extremal-order-ffi crate. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum {
  EO_STATUS_OK = 0,
  EO_STATUS_NULL_POINTER = 1,
  EO_STATUS_INVALID_ARGUMENT = 2,
  EO_STATUS_INVALID_NODE = 3,
  EO_STATUS_INVALID_GRAPH = 4,
  EO_STATUS_THRESHOLD_OUT_OF_RANGE = 5,
  EO_STATUS_PARSE = 6,
  EO_STATUS_IO = 7,
  EO_STATUS_NUMERICAL = 8,
  EO_STATUS_PANIC = 9,
} EoStatus;

typedef struct EoDag EoDag;

typedef struct EoModel EoModel;

typedef struct EoOrdering EoOrdering;

/**
 * Samples, `n` rows by `d` nodes.
 */
typedef struct EoSample EoSample;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Owned by the
 * library and valid until the next call on the same thread.
 */
const char *eo_last_error_message(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void eo_string_free(char *s);

/**
 * Sample from `n * d` row-major values. `standardized` marks Fréchet(2) margins.
 *
 * # Safety
 * `values` must point to `n * d` doubles; `out` must be writable.
 */
EoStatus eo_sample_new(size_t n, size_t d, const double *values, bool standardized, EoSample **out);

/**
 * Reads a numeric CSV file, one column per node.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
EoStatus eo_sample_load_csv(const char *path, bool has_header, EoSample **out);

/**
 * # Safety
 * `sample` must be NULL or a live handle.
 */
void eo_sample_free(EoSample *sample);

/**
 * # Safety
 * `sample` must be a live handle.
 */
EoStatus eo_sample_shape(const EoSample *sample, size_t *n, size_t *d);

/**
 * Copies the row-major values into `buf` of length `len >= n * d`.
 *
 * # Safety
 * `buf` must point to `len` writable doubles.
 */
EoStatus eo_sample_values(const EoSample *sample, double *buf, size_t len);

/**
 * Rank transform to Fréchet(2) margins.
 *
 * # Safety
 * `sample` must be a live handle; `out` must be writable.
 */
EoStatus eo_sample_standardize(const EoSample *sample, EoSample **out);

/**
 * DAG on nodes `1..=d` from `n_edges` pairs `(from, to)` in `edges`.
 *
 * # Safety
 * `edges` must point to `2 * n_edges` values; `out` must be writable.
 */
EoStatus eo_dag_new(size_t d, const size_t *edges, size_t n_edges, EoDag **out);

/**
 * Parses the edge-list text format (first line `d`, then `from to` lines).
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
EoStatus eo_dag_from_text(const char *text, EoDag **out);

/**
 * Edge-list text; release with `eo_string_free`.
 *
 * # Safety
 * `dag` must be a live handle; `out` must be writable.
 */
EoStatus eo_dag_to_text(const EoDag *dag, char **out);

/**
 * # Safety
 * `dag` must be a live handle.
 */
EoStatus eo_dag_node_count(const EoDag *dag, size_t *d);

/**
 * # Safety
 * `dag` must be NULL or a live handle.
 */
void eo_dag_free(EoDag *dag);

/**
 * Random model: Bernoulli(`p`) edges, uniform weights, seeded.
 *
 * # Safety
 * `out` must be writable.
 */
EoStatus eo_model_random(size_t d, double p, double alpha, uint64_t seed, EoModel **out);

/**
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
EoStatus eo_model_from_json(const char *json, EoModel **out);

/**
 * Model JSON; release with `eo_string_free`.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
EoStatus eo_model_to_json(const EoModel *model, char **out);

/**
 * Copy of the model's DAG.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
EoStatus eo_model_dag(const EoModel *model, EoDag **out);

/**
 * `n` draws of the row-standardised model with raw margins, seeded.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
EoStatus eo_model_simulate(const EoModel *model, size_t n, uint64_t seed, EoSample **out);

/**
 * # Safety
 * `model` must be NULL or a live handle.
 */
void eo_model_free(EoModel *model);

/**
 * Estimates a causal order. `k = 0` selects `floor(n^0.4)`.
 *
 * # Safety
 * `sample` must be a live handle; `out` must be writable.
 */
EoStatus eo_causal_order(const EoSample *sample,
                         double a,
                         double epsilon,
                         size_t k,
                         EoOrdering **out);

/**
 * Writes the roots-first order into `buf` (length `len >= d`).
 *
 * # Safety
 * `ordering` must be a live handle; `buf` must point to `len` writable values.
 */
EoStatus eo_ordering_ancestral(const EoOrdering *ordering, size_t *buf, size_t len);

/**
 * # Safety
 * `ordering` must be a live handle.
 */
EoStatus eo_ordering_len(const EoOrdering *ordering, size_t *len);

/**
 * Full result with audit trail as JSON; release with `eo_string_free`.
 *
 * # Safety
 * `ordering` must be a live handle; `out` must be writable.
 */
EoStatus eo_ordering_to_json(const EoOrdering *ordering, char **out);

/**
 * # Safety
 * `ordering` must be NULL or a live handle.
 */
void eo_ordering_free(EoOrdering *ordering);

/**
 * Structural intervention distance between two DAGs.
 *
 * # Safety
 * Handles must be live; outputs must be writable.
 */
EoStatus eo_sid(const EoDag *truth, const EoDag *estimate, size_t *raw, double *normalized);

/**
 * SID of the complete DAG induced by a roots-first order of length `len`.
 *
 * # Safety
 * `truth` must be live; `order` must point to `len` values; outputs must be writable.
 */
EoStatus eo_sid_of_order(const EoDag *truth,
                         const size_t *order,
                         size_t len,
                         size_t *raw,
                         double *normalized);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EXTREMAL_ORDER_H */
