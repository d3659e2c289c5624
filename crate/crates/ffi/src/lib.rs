//! C ABI over the tracking engine.
//!
//! A tracker handle is created from optional key=value configuration text,
//! initialized with the first frame and a bounding box, then advanced one
//! frame at a time. Every function returns a status code; the most recent
//! error message is kept per thread and can be fetched with
//! [`at_last_error_message`]. Frames are 8-bit, interleaved, row-major, with
//! 1 (grayscale) or 3 (RGB) channels.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};

use autotrack_core::config::TrackerConfig;
use autotrack_core::imaging::{BBox, Frame};
use autotrack_core::tracker::Tracker;

/// Status code returned by every API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtStatus {
    AtOk = 0,
    /// A required pointer argument was null.
    AtNullArgument = 1,
    /// Configuration text, frame dimensions, or box were invalid.
    AtInvalidArgument = 2,
    /// Tracker initialization failed.
    AtInitFailed = 3,
    /// Advancing the tracker failed; the handle state is unchanged.
    AtTrackFailed = 4,
    /// The handle was used before initialization.
    AtNotInitialized = 5,
}

/// Bounding box: top-left corner plus extent, pixels, 0-based.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AtBBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

/// Per-frame diagnostics mirrored from the tracker trace.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AtFrameInfo {
    /// Global response-variation norm of the frame.
    pub pi_norm: f64,
    /// Temporal penalty used for (or carried through) the frame.
    pub theta: f64,
    /// 1 when the filter was trained on this frame, 0 when gated.
    pub learned: u8,
}

enum HandleState {
    Configured(TrackerConfig),
    Running(Box<Tracker>),
}

/// Opaque tracker handle.
pub struct AtTracker {
    state: HandleState,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<Vec<u8>>) {
    let c = CString::new(msg).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn at_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn at_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Create a tracker from optional key=value configuration text (UTF-8,
/// nul-terminated). Pass null for the published defaults. On success the
/// handle is written to `out` and must be released with [`at_tracker_free`].
///
/// # Safety
/// `config_text`, when non-null, must point to a nul-terminated string; `out`
/// must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn at_tracker_new(
    config_text: *const c_char,
    out: *mut *mut AtTracker,
) -> AtStatus {
    if out.is_null() {
        set_error("out handle pointer is null");
        return AtStatus::AtNullArgument;
    }
    let cfg = if config_text.is_null() {
        TrackerConfig::default()
    } else {
        let text = match CStr::from_ptr(config_text).to_str() {
            Ok(t) => t,
            Err(_) => {
                set_error("config text is not valid UTF-8");
                return AtStatus::AtInvalidArgument;
            }
        };
        match TrackerConfig::from_text(text) {
            Ok(c) => c,
            Err(e) => {
                set_error(e.to_string());
                return AtStatus::AtInvalidArgument;
            }
        }
    };
    let handle = Box::new(AtTracker {
        state: HandleState::Configured(cfg),
    });
    *out = Box::into_raw(handle);
    AtStatus::AtOk
}

/// Release a tracker handle; null is ignored.
///
/// # Safety
/// `tracker` must be null or a pointer obtained from [`at_tracker_new`] that
/// has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn at_tracker_free(tracker: *mut AtTracker) {
    if !tracker.is_null() {
        drop(Box::from_raw(tracker));
    }
}

unsafe fn frame_from_raw(
    data: *const u8,
    width: usize,
    height: usize,
    channels: usize,
) -> Result<Frame, String> {
    if data.is_null() {
        return Err("frame data pointer is null".to_string());
    }
    let len = width
        .checked_mul(height)
        .and_then(|p| p.checked_mul(channels))
        .ok_or_else(|| "frame dimensions overflow".to_string())?;
    let slice = std::slice::from_raw_parts(data, len);
    Frame::new(width, height, channels, slice.to_vec()).map_err(|e| e.to_string())
}

/// Initialize the tracker on the first frame with the object's bounding box.
///
/// # Safety
/// `tracker` must be a live handle; `data` must point to
/// `width * height * channels` readable bytes.
#[no_mangle]
pub unsafe extern "C" fn at_tracker_init(
    tracker: *mut AtTracker,
    data: *const u8,
    width: usize,
    height: usize,
    channels: usize,
    bbox: AtBBox,
) -> AtStatus {
    let Some(handle) = tracker.as_mut() else {
        set_error("tracker handle is null");
        return AtStatus::AtNullArgument;
    };
    let frame = match frame_from_raw(data, width, height, channels) {
        Ok(f) => f,
        Err(e) => {
            set_error(e);
            return AtStatus::AtInvalidArgument;
        }
    };
    let cfg = match &handle.state {
        HandleState::Configured(cfg) => cfg.clone(),
        HandleState::Running(t) => t.config().clone(),
    };
    match Tracker::init(&frame, BBox::new(bbox.x, bbox.y, bbox.w, bbox.h), cfg) {
        Ok(t) => {
            handle.state = HandleState::Running(Box::new(t));
            AtStatus::AtOk
        }
        Err(e) => {
            set_error(e.to_string());
            AtStatus::AtInitFailed
        }
    }
}

/// Advance the tracker by one frame. The updated box is written to
/// `out_bbox`; `out_info`, when non-null, receives per-frame diagnostics.
///
/// # Safety
/// `tracker` must be a live handle; `data` must point to
/// `width * height * channels` readable bytes; `out_bbox` must be valid.
#[no_mangle]
pub unsafe extern "C" fn at_tracker_update(
    tracker: *mut AtTracker,
    data: *const u8,
    width: usize,
    height: usize,
    channels: usize,
    out_bbox: *mut AtBBox,
    out_info: *mut AtFrameInfo,
) -> AtStatus {
    let Some(handle) = tracker.as_mut() else {
        set_error("tracker handle is null");
        return AtStatus::AtNullArgument;
    };
    if out_bbox.is_null() {
        set_error("out bbox pointer is null");
        return AtStatus::AtNullArgument;
    }
    let HandleState::Running(t) = &mut handle.state else {
        set_error("tracker has not been initialized with a frame");
        return AtStatus::AtNotInitialized;
    };
    let frame = match frame_from_raw(data, width, height, channels) {
        Ok(f) => f,
        Err(e) => {
            set_error(e);
            return AtStatus::AtInvalidArgument;
        }
    };
    match t.update(&frame) {
        Ok(bbox) => {
            *out_bbox = AtBBox {
                x: bbox.x,
                y: bbox.y,
                w: bbox.w,
                h: bbox.h,
            };
            if let Some(info) = out_info.as_mut() {
                let trace = t.last_trace();
                *info = AtFrameInfo {
                    pi_norm: trace.pi_norm,
                    theta: trace.theta,
                    learned: u8::from(trace.learned),
                };
            }
            AtStatus::AtOk
        }
        Err(e) => {
            set_error(e.to_string());
            AtStatus::AtTrackFailed
        }
    }
}
