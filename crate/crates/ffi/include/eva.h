#ifndef EVA_H
#define EVA_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EvaStatus {
  EVA_STATUS_OK = 0,
  EVA_STATUS_NULL_POINTER = 1,
  EVA_STATUS_INVALID_ARGUMENT = 2,
  EVA_STATUS_DIMENSION_MISMATCH = 3,
  EVA_STATUS_NON_FINITE = 4,
  EVA_STATUS_NUMERIC = 5,
  EVA_STATUS_INVALID_STATE = 6,
  EVA_STATUS_BUFFER_TOO_SMALL = 7,
  EVA_STATUS_IO = 8,
  EVA_STATUS_FORMAT_BAD_MAGIC = 20,
  EVA_STATUS_FORMAT_VERSION = 21,
  EVA_STATUS_FORMAT_TRUNCATED = 22,
  EVA_STATUS_FORMAT_CRC = 23,
  EVA_STATUS_FORMAT_MALFORMED = 24,
  EVA_STATUS_PANIC = 99,
} EvaStatus;

/**
 * Read-only view of a checkpoint file.
 */
typedef struct EvaCheckpointReader EvaCheckpointReader;

/**
 * Streaming SVD state for one layer.
 */
typedef struct EvaSvdStream EvaSvdStream;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` as a
 * NUL-terminated string, truncating if needed. Returns the full message
 * length in bytes, excluding the terminator.
 *
 * # Safety
 * `buf` must be null or valid for `cap` bytes.
 */
size_t eva_last_error_message(char *buf, size_t cap);

/**
 * Leading `k` singular triplets of the `rows × cols` matrix `x`.
 * Writes `k` values to `sigma`, `k × cols` to `vt` and, if `u` is not null,
 * `rows × k` to `u`.
 *
 * # Safety
 * Pointers must be valid for the sizes above.
 */
enum EvaStatus eva_svd_truncated(const double *x,
                                 size_t rows,
                                 size_t cols,
                                 size_t k,
                                 double *sigma,
                                 double *vt,
                                 double *u);

/**
 * Per-component explained-variance scores. `measure`: 0 = eva, 1 = raw,
 * 2 = max.
 *
 * # Safety
 * `sigma` and `out` must be valid for `n` doubles.
 */
enum EvaStatus eva_explained_variance(const double *sigma,
                                      size_t n,
                                      size_t m_samples,
                                      uint8_t measure_tag,
                                      double *out);

/**
 * Global rank redistribution. Layer `i` has `sigma_lens[i]` singular values
 * at `sigmas[i]` computed from `samples[i]` rows. Writes one rank per layer
 * to `ranks_out`, in input order.
 *
 * # Safety
 * All arrays must hold `n_layers` entries and each `sigmas[i]` must be
 * valid for `sigma_lens[i]` doubles.
 */
enum EvaStatus eva_redistribute(const double *const *sigmas,
                                const size_t *sigma_lens,
                                const size_t *samples,
                                size_t n_layers,
                                size_t rank,
                                double rho,
                                uint8_t measure_tag,
                                size_t *ranks_out);

/**
 * Creates a stream over `dim` features tracking `tracked` components.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum EvaStatus eva_stream_new(size_t dim, size_t tracked, struct EvaSvdStream **out);

/**
 * # Safety
 * `stream` must come from [`eva_stream_new`] and not be used afterwards.
 */
void eva_stream_free(struct EvaSvdStream *stream);

/**
 * Folds a `rows × dim` batch into the stream.
 *
 * # Safety
 * `stream` must be live; `x` valid for `rows * dim` doubles.
 */
enum EvaStatus eva_stream_update(struct EvaSvdStream *stream, const double *x, size_t rows);

/**
 * Number of components currently held (at most the tracked count).
 *
 * # Safety
 * `stream` must be live; `out` valid.
 */
enum EvaStatus eva_stream_components(const struct EvaSvdStream *stream, size_t *out);

/**
 * Rows consumed so far.
 *
 * # Safety
 * `stream` must be live; `out` valid.
 */
enum EvaStatus eva_stream_samples_seen(const struct EvaSvdStream *stream, size_t *out);

/**
 * Copies the singular values; `cap` must be at least the component count.
 *
 * # Safety
 * `stream` must be live; `out` valid for `cap` doubles.
 */
enum EvaStatus eva_stream_sigma(const struct EvaSvdStream *stream, double *out, size_t cap);

/**
 * Copies the right-singular vectors (components × dim, row-major).
 *
 * # Safety
 * `stream` must be live; `out` valid for `cap` doubles.
 */
enum EvaStatus eva_stream_vectors(const struct EvaSvdStream *stream, double *out, size_t cap);

/**
 * Whether every held component moved by less than `tau` (|cos|) in the
 * last update. Needs at least two updates.
 *
 * # Safety
 * `stream` must be live; `out` valid.
 */
enum EvaStatus eva_stream_converged(const struct EvaSvdStream *stream, double tau, bool *out);

/**
 * Opens and validates a checkpoint (magic, version, length, CRC).
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` valid.
 */
enum EvaStatus eva_checkpoint_open(const char *path, struct EvaCheckpointReader **out);

/**
 * # Safety
 * `reader` must come from [`eva_checkpoint_open`] and not be used afterwards.
 */
void eva_checkpoint_free(struct EvaCheckpointReader *reader);

/**
 * Layer count and `alpha`.
 *
 * # Safety
 * `reader` must be live; outputs valid.
 */
enum EvaStatus eva_checkpoint_info(const struct EvaCheckpointReader *reader,
                                   size_t *layers,
                                   double *alpha);

/**
 * Rank and host shape of layer `index`.
 *
 * # Safety
 * `reader` must be live; outputs valid.
 */
enum EvaStatus eva_checkpoint_layer(const struct EvaCheckpointReader *reader,
                                    size_t index,
                                    size_t *rank,
                                    size_t *in_features,
                                    size_t *out_features);

/**
 * Copies the layer name, NUL-terminated, into `buf`.
 *
 * # Safety
 * `reader` must be live; `buf` valid for `cap` bytes.
 */
enum EvaStatus eva_checkpoint_layer_name(const struct EvaCheckpointReader *reader,
                                         size_t index,
                                         char *buf,
                                         size_t cap);

/**
 * Copies `A` (rank × in) and `B` (out × rank) of layer `index`.
 *
 * # Safety
 * `reader` must be live; `a` and `b` valid for their sizes.
 */
enum EvaStatus eva_checkpoint_layer_weights(const struct EvaCheckpointReader *reader,
                                            size_t index,
                                            double *a,
                                            size_t a_cap,
                                            double *b,
                                            size_t b_cap);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EVA_H */
