#ifndef CEG_ENGINE_H
#define CEG_ENGINE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CegStatus {
  CEG_STATUS_OK = 0,
  CEG_STATUS_NULL_ARGUMENT = 1,
  CEG_STATUS_INVALID_UTF8 = 2,
  /**
   * The bundle or query document is malformed or names unknown items.
   */
  CEG_STATUS_SCHEMA = 3,
  /**
   * A missingness query whose adjustment conditions fail.
   */
  CEG_STATUS_NOT_IDENTIFIABLE = 4,
  /**
   * The engine rejected the query, e.g. an invalid back-door partition.
   */
  CEG_STATUS_REJECTED = 5,
  /**
   * The oracle check ran but the difference exceeds the tolerance.
   */
  CEG_STATUS_TOLERANCE_EXCEEDED = 6,
  CEG_STATUS_PANIC = 7,
} CegStatus;

typedef enum CegQueryKind {
  CEG_QUERY_KIND_BACKDOOR = 0,
  CEG_QUERY_KIND_CONTROL = 1,
  CEG_QUERY_KIND_MCEG = 2,
} CegQueryKind;

/**
 * Opaque resolved model.
 */
typedef struct CegModel CegModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next library call on the same thread.
 */
const char *ceg_last_error(void);

const char *ceg_version(void);

/**
 * Parses and resolves a bundle document. On success `*out` owns a new handle.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CegStatus ceg_model_from_json(const char *json, struct CegModel **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `m` must come from [`ceg_model_from_json`] and not be used afterwards.
 */
void ceg_model_free(struct CegModel *m);

/**
 * Internal positions of the model's CEG, sinks excluded.
 *
 * # Safety
 * `m` must be a live handle and `out` a valid pointer.
 */
enum CegStatus ceg_model_num_positions(const struct CegModel *m, size_t *out);

/**
 * DOT text of the CEG. Free the string with [`ceg_string_free`].
 *
 * # Safety
 * `m` must be a live handle and `out` a valid pointer.
 */
enum CegStatus ceg_model_to_dot(const struct CegModel *m, char **out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void ceg_string_free(char *s);

/**
 * Evaluates a query document. `cap` bounds path enumeration; 0 selects the default.
 *
 * # Safety
 * `m` must be a live handle, `query_json` NUL-terminated, `out` valid.
 */
enum CegStatus ceg_query(const struct CegModel *m,
                         enum CegQueryKind kind,
                         const char *query_json,
                         size_t cap,
                         double *out);

/**
 * Formula and oracle values for a query. Returns `ToleranceExceeded` with
 * both outputs filled when they differ by more than `tolerance`.
 *
 * # Safety
 * `m` must be a live handle, `query_json` NUL-terminated, outputs valid.
 */
enum CegStatus ceg_oracle_check(const struct CegModel *m,
                                enum CegQueryKind kind,
                                const char *query_json,
                                double tolerance,
                                double *out_formula,
                                double *out_oracle);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CEG_ENGINE_H */
