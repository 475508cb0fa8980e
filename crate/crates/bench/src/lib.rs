//! Synthetic desk-scale corpora and toy experiment recipes.
//!
//! The generator renders a textured elliptical face with a 66-point
//! landmark layout over a moving background, pairs every real clip with
//! manipulated fakes of the same subject, writes landmark tracks with a few
//! corrupted frames, extracts detector crops and assembles a manifest with
//! subject-disjoint splits.

pub mod corpus;
pub mod fakes;
pub mod probe;
pub mod recipes;
pub mod scene;
pub mod template;

pub use corpus::{build_manifest, generate_corpus, load_track, CompressionSettings, Corpus, CorpusConfig, SequenceRecord, INDEX_FILE, MANIFEST_FILE};
pub use fakes::{FakeKind, FakeRecipe};
pub use probe::frame_statistics_probe;
pub use recipes::{
    restrict_train_subjects, run_recipe, save_report, toy_corpus, toy_model, toy_training, train_row, RecipeOptions, RecipeReport, ReportRow,
    RECIPES,
};
pub use scene::{render_clip, Backdrop, Pose, Subject, SyntheticSceneConfig};

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("unknown recipe {name:?}; available: {available}")]
    UnknownRecipe { name: String, available: String },
    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {0}")]
    Format(String),
    #[error(transparent)]
    Data(#[from] vfd_data::DataError),
    #[error(transparent)]
    Media(#[from] vfd_media::MediaError),
    #[error(transparent)]
    Mining(#[from] vfd_mining::MiningError),
    #[error(transparent)]
    Model(#[from] vfd_model::ModelError),
    #[error(transparent)]
    Train(#[from] vfd_train::TrainError),
}

pub type Result<T> = std::result::Result<T, BenchError>;

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.display().to_string(),
        source,
    }
}
