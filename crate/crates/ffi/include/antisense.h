#ifndef ANTISENSE_H
#define ANTISENSE_H

/* Generated by cbindgen. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum AsStatus {
  AS_STATUS_OK = 0,
  AS_STATUS_INVALID_ARGUMENT = 1,
  AS_STATUS_DATA_ERROR = 2,
  AS_STATUS_NUMERICAL_ERROR = 3,
  AS_STATUS_IO_ERROR = 4,
  AS_STATUS_PANIC = 5,
} AsStatus;

/**
 * Opaque MLP estimator handle.
 */
typedef struct AsMlp AsMlp;

/**
 * Opaque radargram handle.
 */
typedef struct AsRadargram AsRadargram;

typedef struct AsDefenseSummary {
  double f_opt_rpm;
  double a_opt_bins;
  double final_estimate_bpm;
  double final_loss;
  uint32_t iterations;
} AsDefenseSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread. Valid until the next
 * failing call on the same thread; never NULL.
 */
const char *as_last_error(void);

/**
 * Synthesizes a single sinusoidally moving target with default radar
 * parameters. Pass NaN for `snr_db` to disable noise.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum AsStatus as_radargram_synthesize_single(double offset_bin,
                                             double amplitude_bins,
                                             double freq_rpm,
                                             double snr_db,
                                             uint32_t scans,
                                             uint32_t bins,
                                             uint64_t seed,
                                             struct AsRadargram **out);

/**
 * Reads an RGRM file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum AsStatus as_radargram_read(const char *path, struct AsRadargram **out);

/**
 * Writes an RGRM file.
 *
 * # Safety
 * `x` must be a live handle and `path` a NUL-terminated string.
 */
enum AsStatus as_radargram_write(const struct AsRadargram *x, const char *path);

/**
 * # Safety
 * `x` must be a live handle; `scans` and `bins` must be writable.
 */
enum AsStatus as_radargram_dims(const struct AsRadargram *x, size_t *scans, size_t *bins);

/**
 * Copies samples row by row as interleaved `(re, im)` pairs. `len` is the
 * capacity of `out` in doubles and must be at least `2 * scans * bins`.
 *
 * # Safety
 * `x` must be a live handle and `out` must point to `len` writable doubles.
 */
enum AsStatus as_radargram_samples(const struct AsRadargram *x, double *out, size_t len);

/**
 * # Safety
 * `x` must be NULL or a handle not yet freed.
 */
void as_radargram_free(struct AsRadargram *x);

/**
 * # Safety
 * `x` must be a live handle and `out_bpm` writable.
 */
enum AsStatus as_estimate_fft(const struct AsRadargram *x, double *out_bpm);

/**
 * # Safety
 * `x` must be a live handle and `out_bpm` writable.
 */
enum AsStatus as_estimate_softspec(const struct AsRadargram *x,
                                   double temperature,
                                   double *out_bpm);

/**
 * Loads MLPW weights.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum AsStatus as_mlp_read(const char *path, struct AsMlp **out);

/**
 * # Safety
 * `m` must be NULL or a handle not yet freed.
 */
void as_mlp_free(struct AsMlp *m);

/**
 * # Safety
 * `m` and `x` must be live handles and `out_bpm` writable.
 */
enum AsStatus as_estimate_mlp(const struct AsMlp *m, const struct AsRadargram *x, double *out_bpm);

/**
 * Optimizes a perturbation with default box constraints. The attack runs
 * against `mlp` when given, otherwise against the soft-argmax spectral
 * estimator. `out_perturbed` may be NULL.
 *
 * # Safety
 * `x` must be a live handle, `mlp` NULL or a live handle, `summary`
 * writable, and `out_perturbed` NULL or writable.
 */
enum AsStatus as_run_defense(const struct AsRadargram *x,
                             const struct AsMlp *mlp,
                             double target_bpm,
                             uint32_t iterations,
                             double alpha,
                             uint64_t seed,
                             struct AsDefenseSummary *summary,
                             struct AsRadargram **out_perturbed);

/**
 * Servo schedule CSV for an SG90-class servo with a 9 mm bin scale.
 * Release the string with [`as_string_free`].
 *
 * # Safety
 * `out_csv` must be writable.
 */
enum AsStatus as_schedule_csv(double f_rpm,
                              double a_bins,
                              double arm_mm,
                              double duration_s,
                              char **out_csv);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library and not yet freed.
 */
void as_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ANTISENSE_H */
