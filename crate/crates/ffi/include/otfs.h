#ifndef OTFS_H
#define OTFS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>


// Result of every fallible call.
typedef enum OtfsStatus {
  OTFS_STATUS_OK = 0,
  OTFS_STATUS_NULL_POINTER = 1,
  OTFS_STATUS_INVALID_ARGUMENT = 2,
  OTFS_STATUS_CONFIG = 3,
  OTFS_STATUS_IO = 4,
  OTFS_STATUS_NUMERICAL = 5,
  OTFS_STATUS_PANIC = 6,
} OtfsStatus;

// Detector selector for `otfs_detect`.
typedef enum OtfsDetector {
  OTFS_DETECTOR_LMMSE = 0,
  OTFS_DETECTOR_AMP = 1,
  OTFS_DETECTOR_UAMP = 2,
  OTFS_DETECTOR_UAMP_MFIC = 3,
  OTFS_DETECTOR_TURBO = 4,
  OTFS_DETECTOR_IW = 5,
} OtfsDetector;

// Opaque simulation configuration.
typedef struct OtfsConfig OtfsConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer stays
// valid until the next failing call on the same thread.
const char *otfs_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *otfs_version(void);

// Creates a configuration holding the built-in defaults.
struct OtfsConfig *otfs_config_new_default(void);

// Loads a TOML configuration file into `*out`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum OtfsStatus otfs_config_from_file(const char *path, struct OtfsConfig **out);

// Parses a TOML configuration document into `*out`.
//
// # Safety
// `text` must be a NUL-terminated string and `out` a writable pointer.
enum OtfsStatus otfs_config_from_toml(const char *text, struct OtfsConfig **out);

// Overrides one key, e.g. `("snr_grid_db", "8,10,12")` or `("frame.m", "16")`.
// The configuration is unchanged on failure.
//
// # Safety
// `cfg` must come from this library; `key` and `value` must be NUL-terminated.
enum OtfsStatus otfs_config_set(struct OtfsConfig *cfg, const char *key, const char *value);

// Number of delay-Doppler symbols per frame (`M N`), 0 for a NULL handle.
//
// # Safety
// `cfg` must be NULL or come from this library.
size_t otfs_config_frame_len(const struct OtfsConfig *cfg);

// Number of detectors selected by the configuration, 0 for a NULL handle.
//
// # Safety
// `cfg` must be NULL or come from this library.
size_t otfs_config_detector_count(const struct OtfsConfig *cfg);

// Releases a configuration. NULL is ignored.
//
// # Safety
// `cfg` must be NULL or a handle not yet freed.
void otfs_config_free(struct OtfsConfig *cfg);

// Detects one frame from `y = H x + w`.
//
// `h` holds the `n x n` delay-Doppler channel (`n = otfs_config_frame_len`),
// `y` the `n` received samples, both interleaved. Constellation indices are
// written to `out_indices[0..n]`.
//
// # Safety
// `h` must point to `2 n n` doubles, `y` to `2 n` doubles and `out_indices`
// to `n` writable entries.
enum OtfsStatus otfs_detect(const struct OtfsConfig *cfg,
                            enum OtfsDetector detector,
                            const double *h,
                            const double *y,
                            double gamma,
                            size_t *out_indices);

// Simulates one operating point and writes the BER of each configured
// detector, in configuration order, to `out_ber[0..len]`.
// `threads = 0` uses every available core.
//
// # Safety
// `out_ber` must point to `len` writable doubles.
enum OtfsStatus otfs_run_point(const struct OtfsConfig *cfg,
                               double snr_db,
                               double velocity_mps,
                               size_t threads,
                               double *out_ber,
                               size_t len);

// Runs the BER-versus-SNR sweep and writes the results CSV (plus its
// `.meta.toml` sidecar) to `path`. `threads = 0` uses every available core.
//
// # Safety
// `path` must be a NUL-terminated string.
enum OtfsStatus otfs_sweep_snr_csv(const struct OtfsConfig *cfg, const char *path, size_t threads);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OTFS_H */
