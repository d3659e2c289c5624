#ifndef AUTOTRACK_H
#define AUTOTRACK_H

/* Generated by cbindgen from autotrack-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every API call.
 */
typedef enum AtStatus {
  AtOk = 0,
  /**
   * A required pointer argument was null.
   */
  AtNullArgument = 1,
  /**
   * Configuration text, frame dimensions, or box were invalid.
   */
  AtInvalidArgument = 2,
  /**
   * Tracker initialization failed.
   */
  AtInitFailed = 3,
  /**
   * Advancing the tracker failed; the handle state is unchanged.
   */
  AtTrackFailed = 4,
  /**
   * The handle was used before initialization.
   */
  AtNotInitialized = 5,
} AtStatus;

/**
 * Opaque tracker handle.
 */
typedef struct AtTracker AtTracker;

/**
 * Bounding box: top-left corner plus extent, pixels, 0-based.
 */
typedef struct AtBBox {
  double x;
  double y;
  double w;
  double h;
} AtBBox;

/**
 * Per-frame diagnostics mirrored from the tracker trace.
 */
typedef struct AtFrameInfo {
  /**
   * Global response-variation norm of the frame.
   */
  double pi_norm;
  /**
   * Temporal penalty used for (or carried through) the frame.
   */
  double theta;
  /**
   * 1 when the filter was trained on this frame, 0 when gated.
   */
  uint8_t learned;
} AtFrameInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *at_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *at_version(void);

/**
 * Create a tracker from optional key=value configuration text (UTF-8,
 * nul-terminated). Pass null for the published defaults. On success the
 * handle is written to `out` and must be released with [`at_tracker_free`].
 *
 * # Safety
 * `config_text`, when non-null, must point to a nul-terminated string; `out`
 * must be a valid pointer.
 */
enum AtStatus at_tracker_new(const char *config_text, struct AtTracker **out);

/**
 * Release a tracker handle; null is ignored.
 *
 * # Safety
 * `tracker` must be null or a pointer obtained from [`at_tracker_new`] that
 * has not been freed yet.
 */
void at_tracker_free(struct AtTracker *tracker);

/**
 * Initialize the tracker on the first frame with the object's bounding box.
 *
 * # Safety
 * `tracker` must be a live handle; `data` must point to
 * `width * height * channels` readable bytes.
 */
enum AtStatus at_tracker_init(struct AtTracker *tracker,
                              const uint8_t *data,
                              size_t width,
                              size_t height,
                              size_t channels,
                              struct AtBBox bbox);

/**
 * Advance the tracker by one frame. The updated box is written to
 * `out_bbox`; `out_info`, when non-null, receives per-frame diagnostics.
 *
 * # Safety
 * `tracker` must be a live handle; `data` must point to
 * `width * height * channels` readable bytes; `out_bbox` must be valid.
 */
enum AtStatus at_tracker_update(struct AtTracker *tracker,
                                const uint8_t *data,
                                size_t width,
                                size_t height,
                                size_t channels,
                                struct AtBBox *out_bbox,
                                struct AtFrameInfo *out_info);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AUTOTRACK_H */
