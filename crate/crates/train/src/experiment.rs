//! Run configuration files and repeated, reseeded training runs.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use vfd_data::{DatasetManifest, Split};
use vfd_model::signal::TemporalNoiseConfig;
use vfd_model::{Detector, DetectorSpec, Variant};

use crate::eval::weighted_test_accuracy;
use crate::planes::PlaneStore;
use crate::record::RunSummary;
use crate::run::{finish_record, run_training, TrainConfig};
use crate::{Result, TrainError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    #[serde(default = "one")]
    pub width_scale: f64,
    #[serde(default = "full_size")]
    pub input_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub middle_repeats: Option<usize>,
}

fn one() -> f64 {
    1.0
}

fn full_size() -> usize {
    299
}

impl ModelConfig {
    pub fn spec(&self) -> DetectorSpec {
        let mut spec = DetectorSpec::standard(self.variant)
            .with_width_scale(self.width_scale)
            .with_input_size(self.input_size);
        if let Some(m) = self.middle_repeats {
            spec.middle_repeats = m;
        }
        spec
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Dataset manifest with train, val and test splits.
    pub manifest: PathBuf,
}

/// Contents of a run configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub data: DataConfig,
    #[serde(default)]
    pub temporal: TemporalNoiseConfig,
    #[serde(default)]
    pub training: TrainConfig,
    /// Independent runs; run `k` uses seed `training.seed + k`.
    #[serde(default = "one_run")]
    pub repeats: usize,
}

fn one_run() -> usize {
    1
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| TrainError::Format(format!("run config: {}", e.message())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }
}

/// Planes for the three splits, built once and shared by repeats.
pub struct ExperimentData {
    pub train: PlaneStore,
    pub val: PlaneStore,
    pub test: PlaneStore,
}

impl ExperimentData {
    pub fn load(manifest: &DatasetManifest, spec: &DetectorSpec, temporal: &TemporalNoiseConfig) -> Result<Self> {
        let kinds = spec.inputs();
        let store = |split| PlaneStore::from_manifest(manifest, split, &kinds, spec.input_size, temporal);
        Ok(Self {
            train: store(Split::Train)?,
            val: store(Split::Val)?,
            test: store(Split::Test)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub variant: Variant,
    pub runs: Vec<RunSummary>,
    pub mean_test_accuracy: f64,
}

/// Trains `repeats` reseeded models on `data` and averages their weighted
/// test accuracy. Runs go to `out/run-<k>/` when `out` is given; up to
/// `jobs` runs execute concurrently.
pub fn run_experiment(
    model: &ModelConfig,
    temporal: &TemporalNoiseConfig,
    training: &TrainConfig,
    repeats: usize,
    data: &ExperimentData,
    out: Option<&Path>,
    jobs: usize,
) -> Result<ExperimentReport> {
    if repeats == 0 {
        return Err(TrainError::Contract("repeats must be at least 1".into()));
    }
    let spec = model.spec();
    let one_run = |k: usize| -> Result<RunSummary> {
        let mut cfg = training.clone();
        cfg.seed = training.seed + k as u64;
        let detector = Detector::with_temporal_config(&spec, *temporal, cfg.seed)?;
        let dir = out.map(|o| o.join(format!("run-{k}")));
        let run = run_training(detector, &data.train, &data.val, &cfg, dir.as_deref())?;
        let mut best = run.best;
        let mut summary = run.record.summary;
        summary.test_accuracy = Some(weighted_test_accuracy(&mut best, &data.test, cfg.batch_size)?);
        if let Some(dir) = &dir {
            best.save(&dir.join("best"), serde_json::json!({ "epoch": summary.best_epoch, "seed": cfg.seed }))?;
            finish_record(dir, &summary)?;
        }
        log::info!(
            "{} run {k}: best epoch {} val {:.4} test {:.4}",
            model.variant,
            summary.best_epoch,
            summary.best_val_accuracy,
            summary.test_accuracy.unwrap_or(f64::NAN)
        );
        Ok(summary)
    };
    let results: Vec<Mutex<Option<Result<RunSummary>>>> = (0..repeats).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, repeats) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                if k >= repeats {
                    break;
                }
                *results[k].lock().expect("result slot") = Some(one_run(k));
            });
        }
    });
    let runs = results
        .into_iter()
        .map(|r| r.into_inner().expect("result slot").expect("every run executed"))
        .collect::<Result<Vec<_>>>()?;
    let mean_test_accuracy = runs.iter().filter_map(|r| r.test_accuracy).sum::<f64>() / runs.len() as f64;
    Ok(ExperimentReport {
        variant: model.variant,
        runs,
        mean_test_accuracy,
    })
}
