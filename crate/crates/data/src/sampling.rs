//! Hierarchical epoch sampling and the matching per-frame probabilities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::manifest::{FrameRef, Split, SplitManifest};
use crate::{DataError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingPlan {
    pub train_rate: f64,
    pub val_rate: f64,
    pub seed: u64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self {
            train_rate: 0.10,
            val_rate: 0.20,
            seed: 0,
        }
    }
}

impl SamplingPlan {
    pub fn rate(&self, split: Split) -> f64 {
        match split {
            Split::Train => self.train_rate,
            Split::Val | Split::Test => self.val_rate,
        }
    }
}

/// `rate * total` draws (at least one), each picking uniformly a class,
/// then a subset of that class, a subject, a sequence and an eligible
/// frame. Draws are independent (with replacement).
pub fn sample_epoch(split: &SplitManifest, rate: f64, seed: u64) -> Result<Vec<FrameRef>> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(DataError::Contract(format!("sampling rate {rate} outside (0, 1]")));
    }
    split.validate()?;
    let n = ((rate * split.total_frames() as f64).round() as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| draw(split, &mut rng)).collect())
}

fn draw(split: &SplitManifest, rng: &mut impl Rng) -> FrameRef {
    let class = rng.gen_range(0..split.classes.len());
    let c = &split.classes[class];
    let subset = rng.gen_range(0..c.subsets.len());
    let s = &c.subsets[subset];
    let subject = rng.gen_range(0..s.subjects.len());
    let j = &s.subjects[subject];
    let sequence = rng.gen_range(0..j.sequences.len());
    let frame = rng.gen_range(j.sequences[sequence].eligible());
    FrameRef {
        class,
        subset,
        subject,
        sequence,
        frame,
    }
}

/// Probability that one draw of [`sample_epoch`] returns `r`.
pub fn frame_weight(split: &SplitManifest, r: &FrameRef) -> f64 {
    let c = &split.classes[r.class];
    let s = &c.subsets[r.subset];
    let j = &s.subjects[r.subject];
    let q = &j.sequences[r.sequence];
    if !q.eligible().contains(&r.frame) {
        return 0.0;
    }
    1.0 / split.classes.len() as f64
        / c.subsets.len() as f64
        / s.subjects.len() as f64
        / j.sequences.len() as f64
        / q.eligible_len() as f64
}
