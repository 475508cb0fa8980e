//! Training and evaluation of the detector family: momentum SGD with a
//! per-epoch learning-rate decay, two early-stopping policies, per-epoch
//! validation on a sampled subset and probability-weighted test accuracy.

pub mod eval;
pub mod experiment;
pub mod optimizer;
pub mod planes;
pub mod record;
pub mod run;
pub mod stopping;

pub use eval::{predict_labels, unweighted_accuracy, weighted_accuracy, weighted_test_accuracy};
pub use experiment::{run_experiment, DataConfig, ExperimentData, ExperimentReport, ModelConfig, RunConfig};
pub use optimizer::{sgd_step, OptimizerConfig, SgdState, StepOutcome};
pub use planes::PlaneStore;
pub use record::{EpochRecord, RecordLine, RecordWriter, RunRecord, RunSummary};
pub use run::{derive_seed, finish_record, run_training, RunOutput, TrainConfig};
pub use stopping::{StopReason, Stopper, StoppingPolicy};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {0}")]
    Format(String),
    #[error(transparent)]
    Model(#[from] vfd_model::ModelError),
    #[error(transparent)]
    Data(#[from] vfd_data::DataError),
    #[error(transparent)]
    Media(#[from] vfd_media::MediaError),
    #[error(transparent)]
    Tensor(#[from] vfd_tensor::TensorError),
}

pub type Result<T> = std::result::Result<T, TrainError>;
