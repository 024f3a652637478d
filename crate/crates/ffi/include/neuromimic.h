#ifndef NEUROMIMIC_H
#define NEUROMIMIC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes shared by all functions.
 */
typedef enum NmStatus {
  NM_STATUS_OK = 0,
  NM_STATUS_NULL_POINTER = 1,
  NM_STATUS_INVALID_ARGUMENT = 2,
  NM_STATUS_CONFIG = 3,
  NM_STATUS_PARSE = 4,
  /**
   * A secure log failed verification.
   */
  NM_STATUS_VERIFY_FAILED = 5,
  NM_STATUS_RUNTIME = 6,
  /**
   * The output buffer is too small; the required size was still written.
   */
  NM_STATUS_BUFFER_TOO_SMALL = 7,
  NM_STATUS_PANIC = 8,
} NmStatus;

/**
 * Fitted anomaly model.
 */
typedef struct NmAnomalyModel NmAnomalyModel;

/**
 * Simulated network plus the configuration it was built with.
 */
typedef struct NmNetwork NmNetwork;

/**
 * Append-only signed update log.
 */
typedef struct NmSecureLog NmSecureLog;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` as a
 * NUL-terminated string, truncating if needed. Returns the untruncated
 * message length in bytes.
 *
 * # Safety
 * `buf` must be null or valid for `cap` writes.
 */
uintptr_t nm_last_error(char *buf, uintptr_t cap);

/**
 * Derives the 32-byte session key for a root seed.
 *
 * # Safety
 * `out` must be valid for 32 writes.
 */
enum NmStatus nm_session_key(uint64_t root_seed, uint8_t *out);

/**
 * Builds a network of `n_neurons` with default constants and seeded weights.
 *
 * # Safety
 * `out` must be valid for one pointer write.
 */
enum NmStatus nm_network_new(uintptr_t n_neurons, uint64_t seed, struct NmNetwork **out);

/**
 * Builds a network from a TOML `SimConfig` table.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` valid for one pointer write.
 */
enum NmStatus nm_network_from_toml(const char *toml, struct NmNetwork **out);

/**
 * # Safety
 * `net` must come from this library and not be used afterwards.
 */
void nm_network_free(struct NmNetwork *net);

/**
 * # Safety
 * `net` must be a live handle; `out` valid for one write.
 */
enum NmStatus nm_network_size(const struct NmNetwork *net, uintptr_t *out);

/**
 * Reads the weight of synapse `pre -> post`.
 *
 * # Safety
 * `net` must be a live handle; `out` valid for one write.
 */
enum NmStatus nm_network_weight(const struct NmNetwork *net,
                                uintptr_t pre,
                                uintptr_t post,
                                double *out);

/**
 * Advances one time step with `current[0..n]` injected. Spiking neuron ids
 * are written to `spikes` (capacity `cap`) and their count to `n_spikes`. If
 * the buffer is short the step still happens and `BufferTooSmall` is
 * returned.
 *
 * # Safety
 * `net` must be a live handle; `current` valid for `n_current` reads;
 * `spikes` null or valid for `cap` writes; `n_spikes` valid for one write.
 */
enum NmStatus nm_network_step(struct NmNetwork *net,
                              const double *current,
                              uintptr_t n_current,
                              uint32_t *spikes,
                              uintptr_t cap,
                              uintptr_t *n_spikes);

/**
 * Parses an anomaly model from its JSON export.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` valid for one pointer write.
 */
enum NmStatus nm_anomaly_model_from_json(const char *json, struct NmAnomalyModel **out);

/**
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void nm_anomaly_model_free(struct NmAnomalyModel *model);

/**
 * Scores one window. `flagged` receives 1 when the score exceeds the
 * model's threshold, else 0.
 *
 * # Safety
 * `model` must be a live handle; `score` and `flagged` valid for one write.
 */
enum NmStatus nm_anomaly_model_detect(const struct NmAnomalyModel *model,
                                      double spike_frequency_hz,
                                      double weight_change_pct,
                                      double latency_ms,
                                      double *score,
                                      int32_t *flagged);

/**
 * # Safety
 * `out` must be valid for one pointer write.
 */
enum NmStatus nm_secure_log_new(struct NmSecureLog **out);

/**
 * Parses the binary log format.
 *
 * # Safety
 * `data` must be valid for `len` reads; `out` valid for one pointer write.
 */
enum NmStatus nm_secure_log_from_bytes(const uint8_t *data,
                                       uintptr_t len,
                                       struct NmSecureLog **out);

/**
 * # Safety
 * `log` must come from this library and not be used afterwards.
 */
void nm_secure_log_free(struct NmSecureLog *log);

/**
 * # Safety
 * `log` must be a live handle; `out` valid for one write.
 */
enum NmStatus nm_secure_log_len(const struct NmSecureLog *log, uintptr_t *out);

/**
 * Appends a signed record. `origin` is 0 for plasticity, 1 for an external
 * write.
 *
 * # Safety
 * `log` must be a live handle; `key` valid for `key_len` reads.
 */
enum NmStatus nm_secure_log_append(struct NmSecureLog *log,
                                   uint32_t pre,
                                   uint32_t post,
                                   double delta_w,
                                   double t_sim,
                                   uint8_t origin,
                                   const uint8_t *key,
                                   uintptr_t key_len);

/**
 * Serializes the log. With `buf` null or `cap` short, only `len` is
 * written and `BufferTooSmall` returned.
 *
 * # Safety
 * `log` must be a live handle; `buf` null or valid for `cap` writes; `len`
 * valid for one write.
 */
enum NmStatus nm_secure_log_to_bytes(const struct NmSecureLog *log,
                                     uint8_t *buf,
                                     uintptr_t cap,
                                     uintptr_t *len);

/**
 * Verifies every record. Returns `VerifyFailed` with the sequence number of
 * the first rejected record in `first_bad_seq`; on success that value is
 * untouched. `n_rejected` may be null.
 *
 * # Safety
 * `log` must be a live handle; `key` valid for `key_len` reads; the output
 * pointers null or valid for one write.
 */
enum NmStatus nm_secure_log_verify(const struct NmSecureLog *log,
                                   const uint8_t *key,
                                   uintptr_t key_len,
                                   uintptr_t *n_rejected,
                                   uint64_t *first_bad_seq);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NEUROMIMIC_H */
