//! Validation and probability-weighted test accuracy.

use vfd_data::{frame_weight, FrameRef, SplitManifest};
use vfd_model::{argmax2, Detector};

use crate::planes::PlaneStore;
use crate::{Result, TrainError};

/// Evaluation-mode predicted labels for `refs`, computed in batches.
pub fn predict_labels(detector: &mut Detector<f32>, planes: &PlaneStore, refs: &[FrameRef], batch: usize) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(refs.len());
    for chunk in refs.chunks(batch.max(1)) {
        let scores = detector.predict(&planes.inputs(chunk)?)?;
        out.extend(scores.iter().map(argmax2));
    }
    Ok(out)
}

/// Fraction of `refs` whose prediction matches the label.
pub fn unweighted_accuracy(split: &SplitManifest, refs: &[FrameRef], predicted: &[usize]) -> Result<f64> {
    if refs.is_empty() || refs.len() != predicted.len() {
        return Err(TrainError::Contract(format!("{} predictions for {} frames", predicted.len(), refs.len())));
    }
    let correct = refs.iter().zip(predicted).filter(|(r, &p)| split.label(r) == p).count();
    Ok(correct as f64 / refs.len() as f64)
}

/// `sum w_i [pred_i == label_i] / sum w_i` with `w_i` the sampling
/// probability of frame `i`.
pub fn weighted_accuracy(split: &SplitManifest, refs: &[FrameRef], predicted: &[usize]) -> Result<f64> {
    if refs.is_empty() || refs.len() != predicted.len() {
        return Err(TrainError::Contract(format!("{} predictions for {} frames", predicted.len(), refs.len())));
    }
    let (mut hit, mut total) = (0.0, 0.0);
    for (r, &p) in refs.iter().zip(predicted) {
        let w = frame_weight(split, r);
        total += w;
        if split.label(r) == p {
            hit += w;
        }
    }
    if !(total > 0.0) {
        return Err(TrainError::Contract("frames carry no sampling weight".into()));
    }
    Ok(hit / total)
}

/// Weighted accuracy over every eligible frame of the store's split.
pub fn weighted_test_accuracy(detector: &mut Detector<f32>, planes: &PlaneStore, batch: usize) -> Result<f64> {
    let refs: Vec<FrameRef> = planes.split().frames().collect();
    if refs.is_empty() {
        return Err(TrainError::Contract("test split has no frames".into()));
    }
    let predicted = predict_labels(detector, planes, &refs, batch)?;
    weighted_accuracy(planes.split(), &refs, &predicted)
}
