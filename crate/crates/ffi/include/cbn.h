#ifndef CBN_H
#define CBN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CbnStatus {
  CBN_STATUS_OK = 0,
  CBN_STATUS_NULL_POINTER = 1,
  CBN_STATUS_INVALID_UTF8 = 2,
  CBN_STATUS_IO = 3,
  CBN_STATUS_INVALID = 4,
  CBN_STATUS_ZERO_PROBABILITY = 5,
  CBN_STATUS_OUT_OF_RANGE = 6,
  CBN_STATUS_BUFFER_TOO_SMALL = 7,
  CBN_STATUS_PANIC = 8,
} CbnStatus;

// Opaque fitted network.
typedef struct CbnNetwork CbnNetwork;

// Settings for [`cbn_learn_from_files`]. Start from
// [`cbn_learn_config_default`].
typedef struct CbnLearnConfig {
  uint32_t bootstraps;
  // Records per bootstrap; 0 means the dataset size.
  uint32_t sample_size;
  double lambda;
  uint64_t seed;
  double ess;
  uint32_t max_em_iterations;
  double tolerance;
  uint32_t max_sem_iterations;
} CbnLearnConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *cbn_version(void);

// Message of the last failed call on this thread, or an empty string. The
// pointer stays valid until the next failing call on the same thread.
const char *cbn_last_error(void);

// Parses a model file held in `json`.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum CbnStatus cbn_network_from_json(const char *json, struct CbnNetwork **out);

// Loads a model file from `path`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum CbnStatus cbn_network_load(const char *path, struct CbnNetwork **out);

// Writes the network as a model file.
//
// # Safety
// `net` must come from this library and `path` be a NUL-terminated string.
enum CbnStatus cbn_network_save(const struct CbnNetwork *net, const char *path);

// Releases a network. Null is a no-op.
//
// # Safety
// `net` must come from this library and not be used afterwards.
void cbn_network_free(struct CbnNetwork *net);

// Number of variables; 0 for a null handle.
//
// # Safety
// `net` must be null or come from this library.
size_t cbn_network_node_count(const struct CbnNetwork *net);

// Index of the variable called `name`.
//
// # Safety
// `net` must come from this library, `name` be NUL-terminated and `out`
// valid.
enum CbnStatus cbn_network_node_index(const struct CbnNetwork *net, const char *name, size_t *out);

// Number of states of variable `node`.
//
// # Safety
// `net` must come from this library and `out` be valid.
enum CbnStatus cbn_network_state_count(const struct CbnNetwork *net, size_t node, size_t *out);

// Posterior of `target` given `evidence`, one state index per variable with
// -1 for unobserved. Writes `state_count(target)` probabilities to `out`.
//
// # Safety
// `evidence` must hold `evidence_len` values and `out` room for `out_len`.
enum CbnStatus cbn_network_posterior(const struct CbnNetwork *net,
                                     const int32_t *evidence,
                                     size_t evidence_len,
                                     size_t target,
                                     double *out,
                                     size_t out_len);

// Defaults: 100 bootstraps of full size, lambda 0.5, seed 0, EM with ess 1
// for at most 100 iterations to tolerance 1e-6, at most 20 structure
// rounds.
struct CbnLearnConfig cbn_learn_config_default(void);

// Learns a network from a CSV file with inferred states and an optional
// prior knowledge file (null for none).
//
// # Safety
// Strings must be NUL-terminated; `config` and `out` must be valid.
enum CbnStatus cbn_learn_from_files(const char *data_path,
                                    const char *knowledge_path,
                                    const struct CbnLearnConfig *config,
                                    struct CbnNetwork **out);

// Area under the ROC curve of `scores` against 0/1 `labels`.
//
// # Safety
// `scores` and `labels` must hold `len` values; `out_auc` must be valid.
enum CbnStatus cbn_roc_auc(const double *scores,
                           const uint8_t *labels,
                           size_t len,
                           double *out_auc);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CBN_H */
