#ifndef LOGAUG_H
#define LOGAUG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum {
  LOGAUG_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  LOGAUG_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  LOGAUG_STATUS_INVALID_UTF8 = 2,
  /**
   * Rule source did not parse.
   */
  LOGAUG_STATUS_PARSE = 3,
  /**
   * Rules are well-formed but do not fit the graph (unknown neuron, cycle, ...).
   */
  LOGAUG_STATUS_VALIDATION = 4,
  /**
   * A file could not be read, or a graph file is malformed.
   */
  LOGAUG_STATUS_IO = 5,
  /**
   * A numeric argument is out of range.
   */
  LOGAUG_STATUS_INVALID_ARGUMENT = 6,
  /**
   * An internal error; the library state is unaffected.
   */
  LOGAUG_STATUS_PANIC = 7,
} LogaugStatus;

/**
 * Antecedent form of a distance function.
 */
typedef enum {
  LOGAUG_FORM_CONJUNCTION = 0,
  LOGAUG_FORM_DISJUNCTION = 1,
  LOGAUG_FORM_NEGATED_DISJUNCTION = 2,
  LOGAUG_FORM_NEGATED_CONJUNCTION = 3,
} LogaugForm;

/**
 * A computation graph together with the grounding context from its probe section.
 */
typedef struct LogaugGraph LogaugGraph;

/**
 * A parsed rule program.
 */
typedef struct LogaugRules LogaugRules;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *logaug_version(void);

/**
 * Message of the last failed call on this thread, or null if none failed.
 * The pointer stays valid until the next failing call on this thread.
 */
const char *logaug_last_error(void);

/**
 * Release a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` is null or a string returned by this library and not yet freed.
 */
void logaug_string_free(char *s);

/**
 * Parse rule source text.
 *
 * # Safety
 * `source` is a NUL-terminated string; `out` is valid for a write.
 */
LogaugStatus logaug_rules_parse(const char *source, LogaugRules **out);

/**
 * Load rules by shipped name (for example `c1-5`) or from a file path.
 *
 * # Safety
 * `spec` is a NUL-terminated string; `out` is valid for a write.
 */
LogaugStatus logaug_rules_load(const char *spec, LogaugRules **out);

/**
 * Number of statements in a program.
 *
 * # Safety
 * `rules` is a live handle; `out` is valid for a write.
 */
LogaugStatus logaug_rules_statement_count(const LogaugRules *rules, size_t *out);

/**
 * Set ρ on every statement that does not pin its own. `rho` must be finite
 * and non-negative.
 *
 * # Safety
 * `rules` is a live handle.
 */
LogaugStatus logaug_rules_set_rho(LogaugRules *rules, double rho);

/**
 * Make every statement that does not pin its own ρ a hard constraint.
 *
 * # Safety
 * `rules` is a live handle.
 */
LogaugStatus logaug_rules_set_hard(LogaugRules *rules);

/**
 * Print the program in rule syntax. Free the result with [`logaug_string_free`].
 *
 * # Safety
 * `rules` is a live handle; `out` is valid for a write.
 */
LogaugStatus logaug_rules_to_string(const LogaugRules *rules, char **out);

/**
 * # Safety
 * `rules` is null or a live handle, which becomes invalid.
 */
void logaug_rules_free(LogaugRules *rules);

/**
 * Build a graph from JSON text. Table paths in the probe section are
 * resolved against `base_dir`, or the working directory if it is null.
 *
 * # Safety
 * `json` is a NUL-terminated string, `base_dir` is null or one; `out` is valid for a write.
 */
LogaugStatus logaug_graph_from_json(const char *json, const char *base_dir, LogaugGraph **out);

/**
 * Load a graph file; its tables are resolved next to it.
 *
 * # Safety
 * `path` is a NUL-terminated string; `out` is valid for a write.
 */
LogaugStatus logaug_graph_load(const char *path, LogaugGraph **out);

/**
 * # Safety
 * `graph` is a live handle; `out` is valid for a write.
 */
LogaugStatus logaug_graph_node_count(const LogaugGraph *graph, size_t *out);

/**
 * Number of scalar parameters.
 *
 * # Safety
 * `graph` is a live handle; `out` is valid for a write.
 */
LogaugStatus logaug_graph_parameter_count(const LogaugGraph *graph, size_t *out);

/**
 * Serialize the graph (without its probe section). Free the result with [`logaug_string_free`].
 *
 * # Safety
 * `graph` is a live handle; `out` is valid for a write.
 */
LogaugStatus logaug_graph_to_json(const LogaugGraph *graph, char **out);

/**
 * # Safety
 * `graph` is null or a live handle, which becomes invalid.
 */
void logaug_graph_free(LogaugGraph *graph);

/**
 * Count the cyclic single-consequent statements of `rules` against `graph`.
 * Returns `Validation` if a statement refers to something the graph lacks.
 *
 * # Safety
 * `rules` and `graph` are live handles; `out_cyclic` is valid for a write.
 */
LogaugStatus logaug_check(const LogaugRules *rules, const LogaugGraph *graph, size_t *out_cyclic);

/**
 * Compile `rules` into a new graph, grounded on the graph's probe context.
 * The input graph is unchanged.
 *
 * # Safety
 * `rules` and `graph` are live handles; `out` is valid for a write.
 */
LogaugStatus logaug_augment(const LogaugRules *rules, const LogaugGraph *graph, LogaugGraph **out);

/**
 * Evaluate a distance function over `n` inputs in `[0, 1]`.
 *
 * `negated` may be null (no input negated). When `out_grad` is non-null it
 * receives `n` subgradient entries.
 *
 * # Safety
 * `z` points to `n` doubles, `negated` is null or points to `n` bools,
 * `out_value` is valid for a write and `out_grad` is null or valid for `n` writes.
 */
LogaugStatus logaug_distance(LogaugForm form,
                             const bool *negated,
                             const double *z,
                             size_t n,
                             double *out_value,
                             double *out_grad);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LOGAUG_H */
