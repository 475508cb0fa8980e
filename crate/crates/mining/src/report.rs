//! End-to-end mining of one track into a serializable report.

use serde::{Deserialize, Serialize};

use crate::metrics::{classify_track, compute_metrics, FrameMetrics, Reason, TrackStatistics};
use crate::segments::{extract_segments, select_training_frames, Segment};
use crate::track::LandmarkTrack;
use crate::{MiningError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MiningConfig {
    pub budget_lo: usize,
    pub budget_hi: usize,
}

impl Default for MiningConfig {
    fn default() -> Self {
        Self {
            budget_lo: 5000,
            budget_hi: 6000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    #[serde(flatten)]
    pub metrics: FrameMetrics,
    pub suitable: bool,
    pub reasons: Vec<Reason>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiningReport {
    pub frames: Vec<FrameReport>,
    pub statistics: TrackStatistics,
    pub scene_cuts: Vec<usize>,
    pub segments: Vec<Segment>,
    pub train: Vec<Segment>,
    pub test: Vec<Segment>,
    pub train_frames: usize,
    pub shortfall: Option<usize>,
}

impl MiningReport {
    pub fn unsuitable_frames(&self) -> Vec<usize> {
        self.frames.iter().filter(|f| !f.suitable).map(|f| f.metrics.frame).collect()
    }
}

pub fn mine_track(track: &LandmarkTrack, scene_cuts: &[usize], cfg: &MiningConfig) -> Result<MiningReport> {
    if track.is_empty() {
        return Err(MiningError::Contract("empty landmark track".into()));
    }
    if cfg.budget_lo > cfg.budget_hi {
        return Err(MiningError::Contract(format!("budget {}..{} is inverted", cfg.budget_lo, cfg.budget_hi)));
    }
    let (metrics, statistics) = compute_metrics(track);
    let labels = classify_track(&metrics, &statistics);
    let suitable: Vec<bool> = labels.iter().map(|l| l.is_suitable()).collect();
    let segments = extract_segments(&suitable, scene_cuts);
    let sel = select_training_frames(&segments, cfg.budget_lo, cfg.budget_hi);
    let mut cuts = scene_cuts.to_vec();
    cuts.sort_unstable();
    cuts.dedup();
    Ok(MiningReport {
        frames: metrics
            .into_iter()
            .zip(labels)
            .map(|(m, l)| FrameReport {
                metrics: m,
                suitable: l.is_suitable(),
                reasons: l.reasons,
            })
            .collect(),
        statistics,
        scene_cuts: cuts,
        segments,
        train: sel.train,
        test: sel.test,
        train_frames: sel.train_frames,
        shortfall: sel.shortfall,
    })
}
