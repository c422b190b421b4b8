#ifndef TERNACCEL_H
#define TERNACCEL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ta_status {
  TA_STATUS_OK = 0,
  TA_STATUS_NULL_POINTER = 1,
  TA_STATUS_INVALID_ARGUMENT = 2,
  TA_STATUS_DIMENSION_MISMATCH = 3,
  TA_STATUS_PARSE = 4,
  TA_STATUS_IO = 5,
  TA_STATUS_INFEASIBLE = 6,
  TA_STATUS_CALIBRATION = 7,
  TA_STATUS_PANIC = 8,
} ta_status;

// Where the swap starts relative to prefill.
typedef enum ta_trigger {
  // No swap: the static design.
  TA_TRIGGER_NONE = 0,
  TA_TRIGGER_AFTER_LAST_ATTENTION = 1,
  TA_TRIGGER_AFTER_PREFILL_COMPLETE = 2,
} ta_trigger;

typedef enum ta_port_role {
  TA_PORT_ROLE_Q = 0,
  TA_PORT_ROLE_K = 1,
  TA_PORT_ROLE_V = 2,
  TA_PORT_ROLE_OUT = 3,
  TA_PORT_ROLE_SHARED = 4,
} ta_port_role;

// A calibrated latency model together with its baseline design.
typedef struct ta_model ta_model;

// Ternary weights packed for table-lookup matmul.
typedef struct ta_packed ta_packed;

typedef struct ta_sim_summary {
  double prefill_end_s;
  double exposed_s;
  double ttft_s;
  double decode_tps;
  // 1 when there is no swap.
  double hidden_fraction;
} ta_sim_summary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread. Empty if none. The
// pointer stays valid until the next failing call on the same thread.
const char *ta_last_error_message(void);

const char *ta_version(void);

// Packs a row-major `rows × cols` matrix of -1/0/+1 into groups of
// `group_size` (1 to 6).
//
// # Safety
// `weights` must hold `rows * cols` values and `out` must be writable.
enum ta_status ta_packed_new(const int8_t *weights,
                             size_t rows,
                             size_t cols,
                             size_t group_size,
                             struct ta_packed **out);

// # Safety
// `p` must be null or a handle from [`ta_packed_new`] not yet freed.
void ta_packed_free(struct ta_packed *p);

// # Safety
// `p` must be null or a live handle; `rows` and `cols` may be null.
enum ta_status ta_packed_shape(const struct ta_packed *p, size_t *rows, size_t *cols);

// `y = W·x` over INT8 activations with exact INT32 accumulation.
//
// # Safety
// `x` must hold `x_len` values and `y` must have room for `y_len`.
enum ta_status ta_packed_gemv(const struct ta_packed *p,
                              const int8_t *x,
                              size_t x_len,
                              int32_t *y,
                              size_t y_len);

// Parses a latency model from the TOML text written by `calibrate`.
//
// # Safety
// `toml` must be a NUL-terminated string and `out` writable.
enum ta_status ta_model_from_toml(const char *toml, struct ta_model **out);

// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum ta_status ta_model_load(const char *path, struct ta_model **out);

// # Safety
// `m` must be null or a handle from `ta_model_*` not yet freed.
void ta_model_free(struct ta_model *m);

// Prefill latency in seconds of the model's baseline design.
//
// # Safety
// `m` must be a live handle and `seconds` writable.
enum ta_status ta_model_prefill_latency(const struct ta_model *m,
                                        uint64_t seq_len,
                                        double *seconds);

// Latency in seconds of one decode step over `seq_len` cached tokens.
//
// # Safety
// `m` must be a live handle and `seconds` writable.
enum ta_status ta_model_decode_latency(const struct ta_model *m, uint64_t seq_len, double *seconds);

// Simulates one request on the model's baseline design.
//
// # Safety
// `m` must be a live handle and `out` writable.
enum ta_status ta_simulate(const struct ta_model *m,
                           uint64_t prompt_len,
                           uint64_t n_gen,
                           size_t n_layers,
                           double ffn_fraction,
                           double t_reconfig,
                           enum ta_trigger trigger,
                           struct ta_sim_summary *out);

// Causal blocked attention over row-major `n × d` Q, K and V. `reverse`
// selects the reverse wave schedule, otherwise K blocks run in order.
//
// # Safety
// `q`, `k`, `v` and `out` must each hold `n * d` floats.
enum ta_status ta_flash_attention(const float *q,
                                  const float *k,
                                  const float *v,
                                  size_t n,
                                  size_t d,
                                  size_t block_size,
                                  size_t n_pe,
                                  bool reverse,
                                  float *out);

// Single-query attention of `q` (length `d`) over `t` cached rows.
//
// # Safety
// `q` and `out` must hold `d` floats; `k` and `v` must hold `t * d`.
enum ta_status ta_decode_attention(const float *q,
                                   const float *k,
                                   const float *v,
                                   size_t t,
                                   size_t d,
                                   float *out);

// Bandwidth available to KV-cache reads for the given port roles.
//
// # Safety
// `roles` must hold `n_ports` values and `bytes_per_s` must be writable.
enum ta_status ta_kv_bandwidth(const enum ta_port_role *roles,
                               size_t n_ports,
                               double per_port_bw,
                               double *bytes_per_s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TERNACCEL_H */
