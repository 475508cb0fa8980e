//! The detector family: input transforms, parametric entry/middle/exit
//! blocks and the C, S, CS, CST and CS_noT compositions.

pub mod architecture;
pub mod checkpoint;
mod detector;
mod params;
pub mod signal;

pub use architecture::{DetectorSpec, EntryFlowSpec, InputKind, LayerTrace, ShapeTrace, StreamSpec, Variant};
pub use detector::{argmax2, Detector, DetectorInputs, Forward, TemporalInput};
pub use params::ParamStore;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error(transparent)]
    Tensor(#[from] vfd_tensor::TensorError),
    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },
}

pub type Result<T> = std::result::Result<T, ModelError>;

pub(crate) fn contract<T>(msg: impl Into<String>) -> Result<T> {
    Err(ModelError::Contract(msg.into()))
}
