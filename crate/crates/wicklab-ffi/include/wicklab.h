/* C interface to the wicklab engine. Regenerate with:
   cargo build -p wicklab-ffi --features generate-header */

#ifndef WICKLAB_H
#define WICKLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible call.
typedef enum WicklabStatus {
  WicklabStatus_Ok = 0,
  WicklabStatus_NullPointer = 1,
  WicklabStatus_InvalidArgument = 2,
  WicklabStatus_GridMismatch = 3,
  WicklabStatus_NotResolved = 4,
  WicklabStatus_BudgetExceeded = 5,
  WicklabStatus_NotAdapted = 6,
  WicklabStatus_ParseError = 7,
  WicklabStatus_InternalError = 8,
} WicklabStatus;

// Opaque algebra-element handle.
typedef struct WicklabGep WicklabGep;

// Opaque grid handle.
typedef struct WicklabGrid WicklabGrid;

// Opaque elementary-process handle (factor/weight summands on one grid).
typedef struct WicklabProcess WicklabProcess;

// Opaque step-function handle.
typedef struct WicklabStep WicklabStep;

// One step-function piece: `value` on the half-open interval `(lo, hi]`.
typedef struct WicklabInterval {
  double lo;
  double hi;
  double value;
} WicklabInterval;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static string.
const char *wicklab_version(void);

// Copies the last error message into `buf` (truncated to `len - 1` bytes,
// NUL terminated) and returns its full length.
//
// # Safety
// `buf` must point to `len` writable bytes, or be NULL (query length).
size_t wicklab_last_error(char *buf, size_t len);

// Frees a string returned through a `char**` out parameter.
//
// # Safety
// `s` must come from this library and not have been freed before.
void wicklab_string_free(char *s);

// Builds a grid from strictly increasing times starting at 0.
//
// # Safety
// `times` must point to `n` doubles; `out` must be a valid out pointer.
enum WicklabStatus wicklab_grid_new(const double *times, size_t n, struct WicklabGrid **out);

// # Safety
// `grid` must come from `wicklab_grid_new` and not be freed twice.
void wicklab_grid_free(struct WicklabGrid *grid);

// Builds the canonical step function `Σ value_j 1_{(lo_j, hi_j]}`
// (overlapping pieces add).
//
// # Safety
// `pieces` must point to `n` intervals; `out` must be valid.
enum WicklabStatus wicklab_step_new(const struct WicklabInterval *pieces,
                                    size_t n,
                                    struct WicklabStep **out);

// Parses a step function from its JSON form (array of {lo, hi, value}).
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be valid.
enum WicklabStatus wicklab_step_from_json(const char *json, struct WicklabStep **out);

// Writes the canonical JSON form; free with `wicklab_string_free`.
//
// # Safety
// `step` and `out` must be valid.
enum WicklabStatus wicklab_step_to_json(const struct WicklabStep *step, char **out);

// # Safety
// `step` must come from this library and not be freed twice.
void wicklab_step_free(struct WicklabStep *step);

// L²([0,∞)) inner product of two step functions.
//
// # Safety
// Handles must be valid; `out` must point to a writable double.
enum WicklabStatus wicklab_step_inner(const struct WicklabStep *a,
                                      const struct WicklabStep *b,
                                      double *out);

// Wiener integral `I(h)` of a step function resolved on the grid.
//
// # Safety
// Handles and `out` must be valid.
enum WicklabStatus wicklab_wiener(const struct WicklabStep *h,
                                  const struct WicklabGrid *grid,
                                  struct WicklabGep **out);

// Wick exponential `exp◇(I(g)) = exp(I(g) - ||g||²/2)`.
//
// # Safety
// Handles and `out` must be valid.
enum WicklabStatus wicklab_wick_exp(const struct WicklabStep *g,
                                    const struct WicklabGrid *grid,
                                    struct WicklabGep **out);

// Exact expectation.
//
// # Safety
// Handles and `out` must be valid.
enum WicklabStatus wicklab_gep_expect(const struct WicklabGep *x, double *out);

// Exact n-th moment (n >= 1).
//
// # Safety
// Handles and `out` must be valid.
enum WicklabStatus wicklab_gep_moment(const struct WicklabGep *x, uint32_t n, double *out);

// S-transform `(SX)(v) = E[X exp◇(I(v))]`, exact.
//
// # Safety
// Handles and `out` must be valid.
enum WicklabStatus wicklab_gep_s_transform(const struct WicklabGep *x,
                                           const struct WicklabStep *v,
                                           double *out);

// Serializes the element (grid times, terms with drift vectors and
// multi-index polynomial maps); free with `wicklab_string_free`.
//
// # Safety
// Handles and `out` must be valid.
enum WicklabStatus wicklab_gep_to_json(const struct WicklabGep *x, char **out);

// Parses an element from its JSON form.
//
// # Safety
// `json` must be NUL-terminated; `out` must be valid.
enum WicklabStatus wicklab_gep_from_json(const char *json, struct WicklabGep **out);

// # Safety
// `x` must come from this library and not be freed twice.
void wicklab_gep_free(struct WicklabGep *x);

// Creates an empty elementary process on a grid; add summands with
// `wicklab_process_push`.
//
// # Safety
// Handles and `out` must be valid.
enum WicklabStatus wicklab_process_new(const struct WicklabGrid *grid, struct WicklabProcess **out);

// Appends the summand `factor ⊗ weight`.
//
// # Safety
// Handles must be valid; `process` must be exclusively borrowed.
enum WicklabStatus wicklab_process_push(struct WicklabProcess *process,
                                        const struct WicklabGep *factor,
                                        const struct WicklabStep *weight);

// Parses a process from its JSON form ({grid, summands}).
//
// # Safety
// `json` must be NUL-terminated; `out` must be valid.
enum WicklabStatus wicklab_process_from_json(const char *json, struct WicklabProcess **out);

// # Safety
// `p` must come from this library and not be freed twice.
void wicklab_process_free(struct WicklabProcess *p);

// Skorokhod integral of an elementary process.
//
// # Safety
// Handles and `out` must be valid.
enum WicklabStatus wicklab_skorokhod(const struct WicklabProcess *u, struct WicklabGep **out);

// Characterization residual `(SX)(v) - Σ_j (SF_j)(v) <h_j, v>`.
//
// # Safety
// Handles and `out` must be valid.
enum WicklabStatus wicklab_s_residual(const struct WicklabGep *x,
                                      const struct WicklabProcess *u,
                                      const struct WicklabStep *v,
                                      double *out);

// Evaluates the element on a fresh seeded ensemble, writing one value per
// path. Reruns with the same seed reproduce the buffer bit-exactly.
//
// # Safety
// `out_buf` must point to `n_paths` writable doubles.
enum WicklabStatus wicklab_eval_gep(const struct WicklabGep *x,
                                    size_t n_paths,
                                    uint64_t seed,
                                    double *out_buf);

// Estimates `E[|X|^p]^{1/p}` with a jackknife standard error.
//
// # Safety
// `samples` must point to `n` doubles; `est`/`std_err` must be writable.
enum WicklabStatus wicklab_estimate_lp(const double *samples,
                                       size_t n,
                                       double p,
                                       double *est,
                                       double *std_err);

// Runs a named scenario (ids: remark-2-6, remark-3-8-iii, theorem-2-3,
// wick-identities) with an optional JSON config and returns the report as
// JSON; free with `wicklab_string_free`.
//
// # Safety
// `id` must be NUL-terminated; `config_json` may be NULL; `out` valid.
enum WicklabStatus wicklab_run_scenario(const char *id, const char *config_json, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WICKLAB_H */
