use thiserror::Error;

/// Errors produced by the tracking engine and its pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("patch-too-small: {width}x{height} patch is smaller than one {cell_size}px cell")]
    PatchTooSmall {
        width: usize,
        height: usize,
        cell_size: usize,
    },

    #[error("non-real-inverse: imaginary residual {residual:.3e} exceeds {tolerance:.3e}")]
    NonRealInverse { residual: f64, tolerance: f64 },

    #[error("bank-shape-mismatch: {left:?} vs {right:?}")]
    BankShapeMismatch {
        left: (usize, usize, usize),
        right: (usize, usize, usize),
    },

    #[error("admm-diverged: non-finite value at iteration {iteration}")]
    AdmmDiverged { iteration: usize },

    #[error("invalid-init-box: bounding box does not intersect the frame")]
    InvalidInitBox,

    #[error("frame-degenerate: {0}")]
    FrameDegenerate(String),

    #[error("sequence-malformed: {0}")]
    SequenceMalformed(String),

    #[error("gt-length-mismatch: {frames} frames but {groundtruth} ground-truth lines")]
    GtLengthMismatch { frames: usize, groundtruth: usize },

    #[error("config-unknown-key: {0}")]
    ConfigUnknownKey(String),

    #[error("config-invalid: {key}: {reason}")]
    ConfigInvalid { key: String, reason: String },

    #[error("correspondence-failed: every marker assignment is degenerate")]
    CorrespondenceFailed,

    #[error("refine-degenerate: normal equations are singular")]
    RefineDegenerate,

    #[error("markers-symmetric: permutation {0:?} maps the marker set onto itself")]
    MarkersSymmetric(Vec<usize>),

    #[error("invalid-frame: {0}")]
    InvalidFrame(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("image: {0}")]
    Image(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<image::ImageError> for Error {
    fn from(e: image::ImageError) -> Self {
        Error::Image(e.to_string())
    }
}
