#ifndef STRATSHRINK_H
#define STRATSHRINK_H

/* Generated by cbindgen from stratshrink-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code of every fallible call.
 */
typedef enum ss_status {
  SS_OK = 0,
  SS_NULL_POINTER = 1,
  SS_INVALID_ARGUMENT = 2,
  SS_DOMAIN_ERROR = 3,
  SS_CAPABILITY_ERROR = 4,
  SS_TRUNCATION_ERROR = 5,
  SS_NUMERIC_ERROR = 6,
  SS_PARSE_ERROR = 7,
  SS_BUFFER_TOO_SMALL = 8,
} ss_status;

/**
 * Opaque observation set (one design `X(D')`).
 */
typedef struct ss_observations ss_observations;

/**
 * Opaque parameter tree (leaf rates plus aggregates).
 */
typedef struct ss_tree ss_tree;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent error on this thread, or NULL when the last
 * call succeeded. The pointer stays valid until the next failing call on
 * the same thread.
 */
const char *ss_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *ss_version(void);

/**
 * Builds a parameter tree from `branching[0..depth]` and
 * `leaf_rates[0..leaf_count]`; on success writes a new handle to `out`.
 *
 * # Safety
 * `branching` must point to `depth` readable `uint64_t`s, `leaf_rates` to
 * `leaf_count` readable doubles, and `out` must be a valid writable slot.
 */
enum ss_status ss_tree_new(const uint64_t *branching,
                           uint64_t depth,
                           const double *leaf_rates,
                           uint64_t leaf_count,
                           struct ss_tree **out);

/**
 * Releases a tree handle. NULL is accepted and ignored.
 *
 * # Safety
 * `tree` must be NULL or a handle from `ss_tree_new` not yet freed.
 */
void ss_tree_free(struct ss_tree *tree);

/**
 * Number of leaves of the tree.
 *
 * # Safety
 * `tree` must be a live handle, `out` writable.
 */
enum ss_status ss_tree_leaf_count(const struct ss_tree *tree, uint64_t *out);

/**
 * Grand total rate of the tree.
 *
 * # Safety
 * `tree` must be a live handle, `out` writable.
 */
enum ss_status ss_tree_total(const struct ss_tree *tree, double *out);

/**
 * Draws the observation design `X(d_prime)` from the tree using the
 * generator for `(seed, stream)`; bit-reproducible per inputs.
 *
 * # Safety
 * `tree` must be a live handle, `out` writable.
 */
enum ss_status ss_sample_observations(const struct ss_tree *tree,
                                      uint64_t d_prime,
                                      uint64_t seed,
                                      uint64_t stream,
                                      struct ss_observations **out);

/**
 * Releases an observation handle. NULL is accepted and ignored.
 *
 * # Safety
 * `obs` must be NULL or a handle from `ss_sample_observations` not yet
 * freed.
 */
void ss_observations_free(struct ss_observations *obs);

/**
 * Count at node `(depth, index)` of the design.
 *
 * # Safety
 * `obs` must be a live handle, `out` writable.
 */
enum ss_status ss_observations_count(const struct ss_observations *obs,
                                     uint64_t depth,
                                     uint64_t index,
                                     uint64_t *out);

/**
 * Applies an estimator rule (JSON, same schema as the CLI configs, e.g.
 * `{"rule":"basic_shrink_gb"}`) to the observations and writes the leaf
 * estimates into `out_values[0..capacity]`; `out_len` receives the number
 * of leaves.
 *
 * # Safety
 * `obs` must be a live handle; `rule_json` a NUL-terminated string;
 * `out_values` writable for `capacity` doubles; `out_len` writable.
 */
enum ss_status ss_estimate_json(const struct ss_observations *obs,
                                const char *rule_json,
                                double *out_values,
                                uint64_t capacity,
                                uint64_t *out_len);

/**
 * Monte Carlo risk of a rule on the tree: `reps` paired replications with
 * per-replication RNG streams derived from `seed`.
 *
 * # Safety
 * `tree` must be a live handle; `rule_json` and `loss` NUL-terminated
 * strings; `out_mean`/`out_stderr` writable.
 */
enum ss_status ss_mc_risk_json(const struct ss_tree *tree,
                               const char *rule_json,
                               const char *loss,
                               uint64_t reps,
                               uint64_t seed,
                               double *out_mean,
                               double *out_stderr);

/**
 * Paired Monte Carlo risk difference `risk(rule_a) - risk(rule_b)` with
 * common random numbers.
 *
 * # Safety
 * As for `ss_mc_risk_json`.
 */
enum ss_status ss_mc_risk_diff_json(const struct ss_tree *tree,
                                    const char *rule_a_json,
                                    const char *rule_b_json,
                                    const char *loss,
                                    uint64_t reps,
                                    uint64_t seed,
                                    double *out_mean,
                                    double *out_stderr);

/**
 * Exact truncated-series risk of a basic-model rule at total rate
 * `lambda`, with a rigorous bound on the discarded tail.
 *
 * # Safety
 * `rule_json` must be a NUL-terminated string; `out_value`/`out_bound`
 * writable.
 */
enum ss_status ss_exact_risk_basic_json(const char *rule_json,
                                        uint64_t m,
                                        double lambda,
                                        double tol,
                                        double *out_value,
                                        double *out_bound);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STRATSHRINK_H */
