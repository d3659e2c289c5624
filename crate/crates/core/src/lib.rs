//! Discriminative-correlation-filter visual tracking with automatic
//! spatio-temporal regularization, plus a one-pass-evaluation benchmark
//! harness and a four-marker camera-pose estimation pipeline.
//!
//! The engine trains per-channel correlation filters in the frequency domain
//! with an alternating-direction solver whose spatial weights and temporal
//! penalty are steered online by local and global response-map variation.

pub mod admm;
pub mod bench;
pub mod config;
pub mod error;
pub mod features;
pub mod imaging;
pub mod pose;
pub mod regularization;
pub mod response;
pub mod spectral;
pub mod tracker;

pub use config::{TrackerConfig, Variant};
pub use error::{Error, Result};
pub use imaging::{BBox, Frame};
pub use tracker::{FrameTrace, TrackState, Tracker};
