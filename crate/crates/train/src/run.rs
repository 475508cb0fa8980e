//! The epoch loop: sample, step through minibatches, validate, keep the
//! best model, stop by policy.

use std::path::Path;

use serde::{Deserialize, Serialize};
use vfd_data::sample_epoch;
use vfd_model::Detector;
use vfd_tensor::{Tape, Tensor};

use crate::eval::{predict_labels, unweighted_accuracy};
use crate::optimizer::{sgd_step, OptimizerConfig, SgdState, StepOutcome};
use crate::planes::PlaneStore;
use crate::record::{EpochRecord, RecordLine, RecordWriter, RunRecord, RunSummary};
use crate::stopping::{Stopper, StoppingPolicy};
use crate::{Result, TrainError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Fraction of the training frames drawn per epoch.
    pub train_rate: f64,
    /// Fraction of the validation frames drawn per epoch.
    pub val_rate: f64,
    /// Seeds the epoch samples (and, in experiments, initialization).
    pub seed: u64,
    pub optimizer: OptimizerConfig,
    pub stopping: StoppingPolicy,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 24,
            train_rate: 0.10,
            val_rate: 0.20,
            seed: 0,
            optimizer: OptimizerConfig::default(),
            stopping: StoppingPolicy::default(),
        }
    }
}

pub struct RunOutput {
    pub record: RunRecord,
    /// Model from the epoch with the highest validation accuracy.
    pub best: Detector<f32>,
}

/// Seed of an independent random stream derived from a base seed.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Trains `detector` in place. With `out`, the record goes to
/// `out/run.jsonl` and every new best model to `out/checkpoints/`.
pub fn run_training(
    mut detector: Detector<f32>,
    train: &PlaneStore,
    val: &PlaneStore,
    cfg: &TrainConfig,
    out: Option<&Path>,
) -> Result<RunOutput> {
    cfg.optimizer.validate()?;
    if cfg.batch_size == 0 {
        return Err(TrainError::Contract("batch size must be positive".into()));
    }
    if cfg.stopping.max_epochs() == 0 {
        return Err(TrainError::Contract("epoch limit must be positive".into()));
    }
    let mut writer = out.map(|d| RecordWriter::create(&d.join("run.jsonl"))).transpose()?;
    let mut state = SgdState::new();
    let mut stopper = Stopper::new(cfg.stopping.clone());
    let mut epochs = Vec::new();
    let mut best: Option<(Detector<f32>, Option<String>)> = None;
    let mut non_finite = false;
    let seed = cfg.seed;
    let mut epoch = 0;
    let reason = loop {
        let lr = cfg.optimizer.lr(epoch);
        let sample = sample_epoch(train.split(), cfg.train_rate, derive_seed(seed, 2 * epoch as u64))?;
        if sample.is_empty() {
            return Err(TrainError::Contract("empty epoch sample".into()));
        }
        let (mut loss_sum, mut applied, mut aborted) = (0.0, 0, 0);
        for batch in sample.chunks(cfg.batch_size) {
            let inputs = train.inputs(batch)?;
            let labels: Vec<usize> = batch.iter().map(|r| train.split().label(r)).collect();
            let mut tape = Tape::new();
            let f = detector.forward(&mut tape, &inputs, true)?;
            let loss = tape.softmax_cross_entropy(f.scores, &labels)?;
            let loss_value = tape.value(loss).data()[0] as f64;
            let mut grads = tape.backward(loss)?;
            let grads: Vec<Option<Tensor<f32>>> = f.params.iter().map(|&v| grads.take(v)).collect();
            let outcome = if loss_value.is_finite() {
                sgd_step(detector.params_mut(), &grads, &mut state, lr, &cfg.optimizer)?
            } else {
                StepOutcome::Aborted
            };
            match outcome {
                StepOutcome::Applied => {
                    detector.apply_constraints();
                    loss_sum += loss_value * batch.len() as f64;
                    applied += batch.len();
                }
                StepOutcome::Aborted => {
                    log::warn!("epoch {epoch}: non-finite loss or gradient, step skipped");
                    aborted += 1;
                    non_finite = true;
                }
            }
        }
        let val_refs = sample_epoch(val.split(), cfg.val_rate, derive_seed(seed, 2 * epoch as u64 + 1))?;
        let predicted = predict_labels(&mut detector, val, &val_refs, cfg.batch_size)?;
        let val_accuracy = unweighted_accuracy(val.split(), &val_refs, &predicted)?;
        let reason = stopper.observe(epoch, val_accuracy);
        let mut checkpoint = None;
        if stopper.best().map(|(e, _)| e) == Some(epoch) {
            if let Some(dir) = out {
                let id = format!("checkpoints/epoch-{epoch:03}");
                let meta = serde_json::json!({ "epoch": epoch, "val_accuracy": val_accuracy, "seed": seed });
                detector.save(&dir.join(&id), meta)?;
                checkpoint = Some(id);
            }
            best = Some((detector.clone(), checkpoint.clone()));
        }
        let rec = EpochRecord {
            epoch,
            lr,
            train_loss: if applied > 0 { loss_sum / applied as f64 } else { f64::NAN },
            val_accuracy,
            threshold: detector.threshold(),
            checkpoint,
            train_samples: sample.len(),
            val_samples: val_refs.len(),
            aborted_steps: aborted,
        };
        log::info!(
            "epoch {epoch}: lr {lr:.5} loss {:.4} val {:.4}{}",
            rec.train_loss,
            val_accuracy,
            rec.threshold.map(|t| format!(" t {t:.5}")).unwrap_or_default()
        );
        if let Some(w) = writer.as_mut() {
            w.append(&RecordLine::Epoch(rec.clone()))?;
        }
        epochs.push(rec);
        if let Some(reason) = reason {
            break reason;
        }
        epoch += 1;
    };
    let (best_epoch, best_val_accuracy) = stopper.best().expect("at least one epoch ran");
    let (best, best_checkpoint) = best.expect("best model recorded");
    let summary = RunSummary {
        seed,
        best_epoch,
        best_val_accuracy,
        best_checkpoint,
        epochs_run: epochs.len(),
        stop_reason: reason,
        non_finite,
        test_accuracy: None,
    };
    Ok(RunOutput {
        record: RunRecord { epochs, summary },
        best,
    })
}

/// Appends the summary line once test accuracy (if any) is known.
pub fn finish_record(out: &Path, summary: &RunSummary) -> Result<()> {
    RecordWriter::append_to(&out.join("run.jsonl"))?.append(&RecordLine::Summary(summary.clone()))
}
