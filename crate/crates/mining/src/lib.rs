//! Training-segment mining from facial landmark tracks: per-frame
//! confidence and displacement metrics, the four suitability conditions,
//! segment extraction and frame-budget selection, and convex-hull masking
//! with face-centered crops.

pub mod crop;
pub mod metrics;
pub mod report;
pub mod scene;
pub mod segments;
pub mod track;

pub use crop::{convex_hull, crop_box, mask_and_crop, mask_outside_hull, CropConfig};
pub use metrics::{classify_suitability, classify_track, compute_metrics, FrameMetrics, Reason, Suitability, TrackStatistics};
pub use report::{mine_track, MiningConfig, MiningReport};
pub use scene::{detect_scene_cuts, histogram_distance, luminance_histogram};
pub use segments::{extract_segments, select_training_frames, Segment, Selection};
pub use track::{Landmark, LandmarkFrame, LandmarkTrack, NUM_LANDMARKS};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MiningError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {detail}")]
    Parse { line: usize, detail: String },
    #[error("degenerate landmark hull: {0}")]
    DegenerateHull(String),
}

pub type Result<T> = std::result::Result<T, MiningError>;
