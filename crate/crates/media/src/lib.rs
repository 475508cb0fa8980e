//! Frames and frame sequences shared by the mining, preprocessing and
//! detector crates. Pixels are planar RGB `f32` in `[0, 1]`.

mod image;
mod sequence;

pub use crate::image::{BBox, Image};
pub use sequence::{frame_name, resampled_len, source_position, FrameSequence};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MediaError {
    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("image codec error at {path}: {source}")]
    Codec {
        path: String,
        #[source]
        source: ::image::ImageError,
    },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, MediaError>;
