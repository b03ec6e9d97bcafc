#ifndef PDNQL_H
#define PDNQL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Output formats for `pdnql_result_format`.
 */
typedef enum PdnqlFormat {
  /**
   * Header line, then one line per row.
   */
  PDNQL_FORMAT_CSV = 0,
  /**
   * An array of objects keyed by column name.
   */
  PDNQL_FORMAT_JSON = 1,
  /**
   * Per-operator cost counters.
   */
  PDNQL_FORMAT_COST_JSON = 2,
  /**
   * The executed plan.
   */
  PDNQL_FORMAT_EXPLAIN = 3,
} PdnqlFormat;

/**
 * Optimizer preset for planning and running.
 */
typedef enum PdnqlPreset {
  PDNQL_PRESET_BASELINE = 0,
  PDNQL_PRESET_SMC_MINIMIZED = 1,
  PDNQL_PRESET_FULL = 2,
} PdnqlPreset;

/**
 * Result of every fallible call.
 */
typedef enum PdnqlStatus {
  PDNQL_STATUS_OK = 0,
  PDNQL_STATUS_NULL_ARGUMENT = 1,
  PDNQL_STATUS_INVALID_UTF8 = 2,
  PDNQL_STATUS_INVALID_ARGUMENT = 3,
  PDNQL_STATUS_CATALOG = 10,
  PDNQL_STATUS_LOAD = 11,
  PDNQL_STATUS_PARSE = 12,
  PDNQL_STATUS_RESOLVE = 13,
  PDNQL_STATUS_POLICY = 14,
  PDNQL_STATUS_PLAN = 15,
  PDNQL_STATUS_EXECUTE = 20,
  PDNQL_STATUS_CODEC = 21,
  PDNQL_STATUS_CIRCUIT = 30,
  PDNQL_STATUS_PANIC = 99,
} PdnqlStatus;

/**
 * A loaded network: catalog plus both providers' tables.
 */
typedef struct PdnqlNetwork PdnqlNetwork;

/**
 * The outcome of one query run.
 */
typedef struct PdnqlResult PdnqlResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into this library on the same thread.
 */
const char *pdnql_last_error(void);

/**
 * Loads a network from a JSON config file.
 *
 * # Safety
 * `config_path` is a nul-terminated string; `out` is writable.
 */
enum PdnqlStatus pdnql_network_load(const char *config_path, struct PdnqlNetwork **out);

/**
 * # Safety
 * `net` is null or came from `pdnql_network_load`.
 */
void pdnql_network_free(struct PdnqlNetwork *net);

/**
 * Plans `sql` under a `PdnqlPreset` and writes its explain text to `out`.
 *
 * # Safety
 * `net` is a live handle, `sql` a nul-terminated string, `out` writable.
 */
enum PdnqlStatus pdnql_explain(const struct PdnqlNetwork *net,
                               const char *sql,
                               uint32_t preset,
                               char **out);

/**
 * Runs `sql` across both providers under a `PdnqlPreset`.
 *
 * # Safety
 * `net` is a live handle, `sql` a nul-terminated string, `out` writable.
 */
enum PdnqlStatus pdnql_run(const struct PdnqlNetwork *net,
                           const char *sql,
                           uint32_t preset,
                           struct PdnqlResult **out);

/**
 * # Safety
 * `res` is null or came from `pdnql_run`.
 */
void pdnql_result_free(struct PdnqlResult *res);

/**
 * Number of result rows; 0 for a null handle.
 *
 * # Safety
 * `res` is null or a live handle.
 */
size_t pdnql_result_row_count(const struct PdnqlResult *res);

/**
 * Number of result columns; 0 for a null handle.
 *
 * # Safety
 * `res` is null or a live handle.
 */
size_t pdnql_result_column_count(const struct PdnqlResult *res);

/**
 * Total oblivious comparisons the run performed; 0 for a null handle.
 *
 * # Safety
 * `res` is null or a live handle.
 */
uint64_t pdnql_result_total_compares(const struct PdnqlResult *res);

/**
 * Renders a result as text; `format` is a `PdnqlFormat` value.
 *
 * # Safety
 * `res` is a live handle and `out` writable.
 */
enum PdnqlStatus pdnql_result_format(const struct PdnqlResult *res, uint32_t format, char **out);

/**
 * Garbles the circuit in `circuit_text`, evaluates it on the two parties'
 * integer inputs and writes the decoded output bits to `out_bits`, least
 * significant first.
 *
 * # Safety
 * `circuit_text` is a nul-terminated string; `out_bits` and `out_width`
 * are writable.
 */
enum PdnqlStatus pdnql_garble_eval(const char *circuit_text,
                                   uint64_t alice,
                                   uint64_t bob,
                                   uint64_t seed,
                                   uint64_t *out_bits,
                                   size_t *out_width);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` is null or came from this library and was not freed before.
 */
void pdnql_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PDNQL_H */
