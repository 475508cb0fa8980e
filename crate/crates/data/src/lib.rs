//! Dataset manifests, face-crop extraction for the detector, the
//! hierarchical epoch sampler with its per-frame weights, and the
//! resolution-normalize / compress / extract preparation used for the
//! compression experiments.

pub mod compress;
pub mod extract;
pub mod manifest;
pub mod pipeline;
pub mod resolution;
pub mod sampling;

pub use compress::{encoder_from_env, EncoderClient, ExternalEncoder, Quality, StubEncoder, ENCODER_ENV};
pub use extract::{extract_detector_frames, smooth_boxes, CropTrack, ExtractConfig, ExtractedSequence};
pub use manifest::{Class, ClassEntry, DatasetManifest, FrameRef, Margin, SequenceEntry, Split, SplitManifest, SubjectEntry, SubsetEntry};
pub use pipeline::{CompressionPipeline, PipelineOutput, Stage};
pub use resolution::normalize_resolution;
pub use sampling::{frame_weight, sample_epoch, SamplingPlan};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Media(#[from] vfd_media::MediaError),
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },
    #[error("encoder failed: {0}")]
    Encoder(String),
}

pub type Result<T> = std::result::Result<T, DataError>;

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.display().to_string(),
        source,
    }
}
