use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use vfd_data::{DatasetManifest, Split};
use vfd_model::Detector;
use vfd_train::{run_experiment, weighted_test_accuracy, ExperimentData, PlaneStore, RunConfig};

use crate::error::{io_err, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub split: Split,
    pub batch_size: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            split: Split::Test,
            batch_size: 32,
        }
    }
}

/// Trains `cfg.repeats` models; records, checkpoints and `report.json` go
/// to `out`.
pub fn train(cfg: &RunConfig, out: &Path, jobs: usize) -> Result<()> {
    let manifest = DatasetManifest::load(&cfg.data.manifest)?;
    let spec = cfg.model.spec();
    let data = ExperimentData::load(&manifest, &spec, &cfg.temporal)?;
    let report = run_experiment(&cfg.model, &cfg.temporal, &cfg.training, cfg.repeats, &data, Some(out), jobs)?;
    let path = out.join("report.json");
    fs::write(&path, serde_json::to_string_pretty(&report).expect("report serializes")).map_err(io_err(&path))?;
    for (k, r) in report.runs.iter().enumerate() {
        println!(
            "run {k}: seed {} best epoch {} val {:.4} test {:.4} ({} epochs, {:?})",
            r.seed,
            r.best_epoch,
            r.best_val_accuracy,
            r.test_accuracy.unwrap_or(f64::NAN),
            r.epochs_run,
            r.stop_reason
        );
    }
    println!("mean weighted test accuracy: {:.4}", report.mean_test_accuracy);
    Ok(())
}

/// Weighted accuracy of a checkpoint on one split of a manifest.
pub fn eval(checkpoint: &Path, manifest: &Path, split: Split, batch: usize) -> Result<f64> {
    let (mut det, meta) = Detector::<f32>::load(checkpoint)?;
    log::info!("checkpoint {}: {meta}", checkpoint.display());
    let manifest = DatasetManifest::load(manifest)?;
    let spec = det.spec().clone();
    let planes = PlaneStore::from_manifest(&manifest, split, &spec.inputs(), spec.input_size, det.temporal_config())?;
    Ok(weighted_test_accuracy(&mut det, &planes, batch)?)
}
