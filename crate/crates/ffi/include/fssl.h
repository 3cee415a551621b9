#ifndef FSSL_H
#define FSSL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum FsslStatus {
  FSSL_STATUS_OK = 0,
  /**
   * Invalid configuration or argument value.
   */
  FSSL_STATUS_CONFIG = 1,
  /**
   * Data, I/O or numerical failure while running.
   */
  FSSL_STATUS_RUNTIME = 2,
  FSSL_STATUS_NULL_POINTER = 3,
  FSSL_STATUS_INVALID_UTF8 = 4,
  FSSL_STATUS_OUT_OF_RANGE = 5,
  /**
   * A bug inside the library; the handle involved should be freed.
   */
  FSSL_STATUS_PANIC = 6,
} FsslStatus;

/**
 * A validated experiment configuration.
 */
typedef struct FsslConfig FsslConfig;

/**
 * The per-round metrics of a finished run.
 */
typedef struct FsslRun FsslRun;

/**
 * Test accuracies of one round. Losses and pseudo-label accuracy are NaN
 * when the round produced none.
 */
typedef struct FsslRoundMetrics {
  size_t round;
  double acc_sm;
  double acc_um;
  double acc_em;
  double loss_sup;
  double loss_unsup;
  double pseudo_acc;
} FsslRoundMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next call into the library on the same thread.
 */
const char *fssl_last_error(void);

/**
 * Parses and validates a JSON config.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a valid pointer.
 */
enum FsslStatus fssl_config_from_json(const char *json, struct FsslConfig **out);

/**
 * Replaces the run seed of a config.
 *
 * # Safety
 * `config` must come from [`fssl_config_from_json`] and not be freed.
 */
enum FsslStatus fssl_config_set_seed(struct FsslConfig *config, uint64_t seed);

/**
 * # Safety
 * `config` must be null or come from [`fssl_config_from_json`], freed once.
 */
void fssl_config_free(struct FsslConfig *config);

/**
 * Runs the experiment to completion.
 *
 * # Safety
 * `config` must be a live config handle and `out` a valid pointer.
 */
enum FsslStatus fssl_run(const struct FsslConfig *config, struct FsslRun **out);

/**
 * Number of recorded rounds, 0 for a null handle.
 *
 * # Safety
 * `run` must be null or a live run handle.
 */
size_t fssl_run_round_count(const struct FsslRun *run);

/**
 * Metrics of the `index`-th recorded round (0-based).
 *
 * # Safety
 * `run` must be a live run handle and `out` a valid pointer.
 */
enum FsslStatus fssl_run_metrics(const struct FsslRun *run,
                                 size_t index,
                                 struct FsslRoundMetrics *out);

/**
 * Writes the run's metrics CSV to `path`.
 *
 * # Safety
 * `run` must be a live run handle and `path` a nul-terminated string.
 */
enum FsslStatus fssl_run_write_csv(const struct FsslRun *run, const char *path);

/**
 * # Safety
 * `run` must be null or come from [`fssl_run`], freed once.
 */
void fssl_run_free(struct FsslRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FSSL_H */
