#ifndef MEKD_H
#define MEKD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MekdStatus {
  MEKD_STATUS_OK = 0,
  MEKD_STATUS_NULL_POINTER = 1,
  MEKD_STATUS_INVALID_ARGUMENT = 2,
  MEKD_STATUS_SHAPE = 3,
  MEKD_STATUS_CONTRACT = 4,
  MEKD_STATUS_CONFIG = 5,
  MEKD_STATUS_FORMAT = 6,
  MEKD_STATUS_NON_FINITE = 7,
  MEKD_STATUS_DIVERGED = 8,
  MEKD_STATUS_IO = 9,
  MEKD_STATUS_CHECK = 10,
  MEKD_STATUS_PANIC = 11,
  MEKD_STATUS_INTERNAL = 12,
} MekdStatus;

/**
 * Opaque dataset handle.
 */
typedef struct MekdDataset MekdDataset;

/**
 * Opaque network handle.
 */
typedef struct MekdNetwork MekdNetwork;

/**
 * Headline numbers of a full pipeline run.
 */
typedef struct MekdPipelineSummary {
  double teacher_acc;
  double generator_fid;
  double initial_generator_fid;
  double mekd_student_acc;
  double kd_student_acc;
} MekdPipelineSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *mekd_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mekd_version(void);

/**
 * Builds a classifier MLP `input_dim → hidden… → classes`.
 *
 * # Safety
 * `hidden` must point to `n_hidden` values (NULL allowed when 0); `out`
 * must be a valid pointer to receive the handle.
 */
enum MekdStatus mekd_classifier_new(size_t input_dim,
                                    size_t classes,
                                    const size_t *hidden,
                                    size_t n_hidden,
                                    uint64_t seed,
                                    struct MekdNetwork **out);

/**
 * Builds a generator MLP `classes → hidden… → dim` with outputs in `[0, 1]`.
 *
 * # Safety
 * As [`mekd_classifier_new`].
 */
enum MekdStatus mekd_generator_new(size_t classes,
                                   size_t dim,
                                   const size_t *hidden,
                                   size_t n_hidden,
                                   uint64_t seed,
                                   struct MekdNetwork **out);

/**
 * # Safety
 * `net` must be NULL or a handle returned by this library and not yet freed.
 */
void mekd_network_free(struct MekdNetwork *net);

/**
 * # Safety
 * `net` must be a live handle; `input_dim` and `output_dim` writable.
 */
enum MekdStatus mekd_network_dims(const struct MekdNetwork *net,
                                  size_t *input_dim,
                                  size_t *output_dim);

/**
 * Writes the parameters to `path` (written to a temp file, then renamed).
 *
 * # Safety
 * `net` must be a live handle and `path` a NUL-terminated string.
 */
enum MekdStatus mekd_network_save(const struct MekdNetwork *net, const char *path);

/**
 * Replaces the parameters with those stored at `path`. Shapes must match
 * the network's architecture.
 *
 * # Safety
 * `net` must be a live handle and `path` a NUL-terminated string.
 */
enum MekdStatus mekd_network_load(struct MekdNetwork *net, const char *path);

/**
 * Forward pass on `rows` row-major inputs. Writes `rows × output_dim`
 * values (probabilities for classifiers, images for generators).
 *
 * # Safety
 * `x` must point to `rows × input_dim` values and `out` to `out_len`
 * writable values.
 */
enum MekdStatus mekd_network_forward(const struct MekdNetwork *net,
                                     const double *x,
                                     size_t rows,
                                     double *out,
                                     size_t out_len);

/**
 * Batch-mean `KL(p_teacher ‖ p_student)` after softening both at `tau`.
 *
 * # Safety
 * Both inputs must point to `rows × classes` values; `out` writable.
 */
enum MekdStatus mekd_kld(const double *p_teacher,
                         const double *p_student,
                         size_t rows,
                         size_t classes,
                         double tau,
                         double *out);

/**
 * Fréchet distance between two row-major sample sets of dimension `dim`.
 *
 * # Safety
 * `a` must point to `rows_a × dim` values, `b` to `rows_b × dim`; `out`
 * writable.
 */
enum MekdStatus mekd_frechet_distance(const double *a,
                                      size_t rows_a,
                                      const double *b,
                                      size_t rows_b,
                                      size_t dim,
                                      double *out);

/**
 * Parses in-memory IDX image and label files into a dataset.
 *
 * # Safety
 * `images` must point to `images_len` bytes, `labels` to `labels_len`
 * bytes; `out` must be a valid pointer to receive the handle.
 */
enum MekdStatus mekd_dataset_parse_idx(const uint8_t *images,
                                       size_t images_len,
                                       const uint8_t *labels,
                                       size_t labels_len,
                                       struct MekdDataset **out);

/**
 * # Safety
 * `ds` must be a live handle; the out-pointers writable.
 */
enum MekdStatus mekd_dataset_shape(const struct MekdDataset *ds,
                                   size_t *len,
                                   size_t *dim,
                                   size_t *classes);

/**
 * # Safety
 * `ds` must be NULL or a handle returned by this library and not yet freed.
 */
void mekd_dataset_free(struct MekdDataset *ds);

/**
 * Top-1 accuracy of a classifier on a dataset.
 *
 * # Safety
 * `net` and `ds` must be live handles; `out` writable.
 */
enum MekdStatus mekd_accuracy(const struct MekdNetwork *net,
                              const struct MekdDataset *ds,
                              double *out);

/**
 * Runs teacher training, GAN training and both distillation methods from
 * a configuration text. `out_dir` overrides the configured directory when
 * not NULL.
 *
 * # Safety
 * `config_text` must be a NUL-terminated string, `out_dir` NULL or a
 * NUL-terminated string, and `out` writable.
 */
enum MekdStatus mekd_run_pipeline(const char *config_text,
                                  const char *out_dir,
                                  struct MekdPipelineSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MEKD_H */
