#ifndef SDGIMPUTE_H
#define SDGIMPUTE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SdgStatus {
  SDG_STATUS_OK = 0,
  SDG_STATUS_NULL_ARGUMENT = 1,
  SDG_STATUS_INVALID_UTF8 = 2,
  /**
   * Bad configuration or arguments.
   */
  SDG_STATUS_CONFIG = 3,
  /**
   * Input data could not be read or processed.
   */
  SDG_STATUS_DATA = 4,
  SDG_STATUS_PROVIDER = 5,
  /**
   * A bug inside the library; the message has details.
   */
  SDG_STATUS_PANIC = 6,
} SdgStatus;

typedef struct SdgProvider SdgProvider;

typedef struct SdgRules SdgRules;

typedef struct SdgTable SdgTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL after a success.
 * Valid until the next library call on the same thread.
 */
const char *sdg_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sdg_version(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void sdg_string_free(char *s);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum SdgStatus sdg_table_load(const char *path, struct SdgTable **out);

/**
 * Parses CSV text with a header row; empty fields are missing values.
 *
 * # Safety
 * `csv` must be a NUL-terminated string; `out` must be writable.
 */
enum SdgStatus sdg_table_from_csv(const char *csv, struct SdgTable **out);

/**
 * # Safety
 * `table` must be a live handle; `out` must be writable. Free the result with `sdg_string_free`.
 */
enum SdgStatus sdg_table_to_csv(const struct SdgTable *table, char **out);

/**
 * Number of missing cells, or 0 for a NULL handle.
 *
 * # Safety
 * `table` must be NULL or a live handle.
 */
size_t sdg_table_count_missing(const struct SdgTable *table);

/**
 * # Safety
 * `table` must be NULL or a handle not yet freed.
 */
void sdg_table_free(struct SdgTable *table);

/**
 * Parses rule text. With a table, confidences not declared in the text are
 * measured on it; without one they default to 1.
 *
 * # Safety
 * `rules` must be a NUL-terminated string, `table` NULL or a live handle, `out` writable.
 */
enum SdgStatus sdg_rules_parse(const char *rules,
                               const struct SdgTable *table,
                               struct SdgRules **out);

/**
 * # Safety
 * `rules` must be NULL or a handle not yet freed.
 */
void sdg_rules_free(struct SdgRules *rules);

/**
 * Dependency graph in DOT form.
 *
 * # Safety
 * `rules` must be a live handle; `out` writable. Free the result with `sdg_string_free`.
 */
enum SdgStatus sdg_rules_to_dot(const struct SdgRules *rules, char **out);

/**
 * Local provider over a JSON Lines corpus given as text (`{"id": .., "text": ..}` per line).
 *
 * # Safety
 * `jsonl` must be a NUL-terminated string; `out` writable.
 */
enum SdgStatus sdg_provider_local(const char *jsonl, struct SdgProvider **out);

/**
 * Local provider over a JSON Lines corpus file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` writable.
 */
enum SdgStatus sdg_provider_local_load(const char *path, struct SdgProvider **out);

/**
 * HTTP provider; `url_template` holds `{query}` and optionally `{page}`.
 *
 * # Safety
 * `url_template` must be a NUL-terminated string; `out` writable.
 */
enum SdgStatus sdg_provider_http(const char *url_template, struct SdgProvider **out);

/**
 * # Safety
 * `provider` must be NULL or a handle not yet freed.
 */
void sdg_provider_free(struct SdgProvider *provider);

/**
 * Runs the full imputation. `config_json` may be NULL for defaults; it uses
 * the same field names as the command-line `--config` file. On success
 * `out_table` receives a new table and, when non-NULL, `out_report` the
 * JSON report.
 *
 * # Safety
 * Handles must be live; strings NUL-terminated; output pointers writable.
 */
enum SdgStatus sdg_impute(const struct SdgTable *table,
                          const struct SdgRules *rules,
                          const struct SdgProvider *provider,
                          const char *config_json,
                          struct SdgTable **out_table,
                          char **out_report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SDGIMPUTE_H */
