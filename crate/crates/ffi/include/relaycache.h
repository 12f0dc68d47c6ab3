#ifndef RELAYCACHE_H
#define RELAYCACHE_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RcStatus {
  RC_OK = 0,
  RC_NULL_POINTER = 1,
  RC_INVALID_CONFIG = 2,
  RC_NUMERICAL = 3,
  RC_BUFFER_TOO_SMALL = 4,
  RC_INVALID_ARGUMENT = 5,
  RC_IO = 6,
  RC_PANIC = 7,
} RcStatus;

typedef enum RcSemantics {
  /**
   * A cache hit is not served while the relay is forwarding.
   */
  RC_BLOCKED = 0,
  /**
   * A cache hit on a busy relay is fetched from the data center instead.
   */
  RC_DATA_CENTER = 1,
} RcSemantics;

typedef enum RcNode {
  RC_U1 = 0,
  RC_R = 1,
  RC_BS = 2,
  RC_D = 3,
  RC_U2 = 4,
} RcNode;

/**
 * Opaque model handle.
 */
typedef struct RcModel RcModel;

/**
 * Throughputs in packets per slot.
 */
typedef struct RcThroughput {
  double t_direct;
  double t_relayed;
  double t_noncacheable;
  double t_cacheable;
  double t_network;
} RcThroughput;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses a JSON experiment configuration and stores a new model in `*out_model`.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out_model` must be writable.
 */
enum RcStatus rc_model_from_json(const char *json, struct RcModel **out_model);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must come from [`rc_model_from_json`] and not have been freed.
 */
void rc_model_free(struct RcModel *model);

/**
 * Queue capacity `B` of the model.
 *
 * # Safety
 * `model` must be a live handle; `out_size` must be writable.
 */
enum RcStatus rc_model_queue_size(const struct RcModel *model, size_t *out_size);

/**
 * Closed-form throughputs.
 *
 * # Safety
 * `model` must be a live handle; `out_report` must be writable.
 */
enum RcStatus rc_model_analytic(const struct RcModel *model, struct RcThroughput *out_report);

/**
 * Throughputs from exact enumeration of slot events.
 *
 * # Safety
 * `model` must be a live handle; `out_report` must be writable.
 */
enum RcStatus rc_model_oracle(const struct RcModel *model,
                              enum RcSemantics semantics,
                              struct RcThroughput *out_report);

/**
 * Simulated throughputs. `slots` and `seed` replace the configured values;
 * `out_ci` (optional) receives 99% confidence half-widths.
 *
 * # Safety
 * `model` must be a live handle; `out_report` must be writable; `out_ci` may be null.
 */
enum RcStatus rc_model_simulate(const struct RcModel *model,
                                enum RcSemantics semantics,
                                uint64_t slots,
                                uint64_t seed,
                                struct RcThroughput *out_report,
                                struct RcThroughput *out_ci);

/**
 * Closed-form stationary queue distribution. Writes `B + 1` values into `buf`
 * and the count into `*out_len`; with a short buffer, returns
 * `RC_BUFFER_TOO_SMALL` and only sets `*out_len`.
 *
 * # Safety
 * `model` must be a live handle; `buf` must hold `len` doubles (may be null if `len` is 0);
 * `out_len` must be writable.
 */
enum RcStatus rc_model_steady_state(const struct RcModel *model,
                                    double *buf,
                                    size_t len,
                                    size_t *out_len);

/**
 * Success probability of `tx -> rx` while the nodes in `active_mask`
 * (bit `i` = node `i` of [`RcNode`]) transmit. `tx` must be active.
 *
 * # Safety
 * `model` must be a live handle; `out_prob` must be writable.
 */
enum RcStatus rc_success_prob(const struct RcModel *model,
                              enum RcNode tx,
                              enum RcNode rx,
                              uint8_t active_mask,
                              double *out_prob);

/**
 * Message for the last failed call on this thread, or null after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *rc_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RELAYCACHE_H */
