//! Per-frame landmark metrics and the suitability conditions.

use serde::{Deserialize, Serialize};

use crate::track::LandmarkTrack;

pub const MIN_CONFIDENCE: f64 = 0.2;
pub const MAX_DISPLACEMENT: f64 = 0.1;
pub const OUTLIER_CONFIDENCE: f64 = 0.6;
pub const OUTLIER_DISPLACEMENT: f64 = 0.025;
/// Deviation, in standard deviations, that marks a statistical outlier.
pub const OUTLIER_STDS: f64 = 1.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub frame: usize,
    /// Mean landmark confidence `c_i`; `None` without a detection.
    pub confidence: Option<f64>,
    /// Mean landmark displacement from the previous frame over this
    /// frame's face size, `d_i`; `None` when there is no previous
    /// detection.
    pub displacement: Option<f64>,
    pub face_size: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackStatistics {
    pub mean_c: f64,
    pub std_c: f64,
    pub mean_d: f64,
    pub std_d: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    /// `c_i < 0.2`
    LowConfidence,
    /// `d_i > 0.1`
    LargeDisplacement,
    /// `c_i < 0.6` and below the mean by more than 1.1 standard deviations
    ConfidenceOutlier,
    /// `d_i > 0.025` and above the mean by more than 1.1 standard deviations
    DisplacementOutlier,
    MissingLandmarks,
}

impl Reason {
    /// Condition number (1–4); 0 for a missing detection.
    pub fn number(self) -> u8 {
        match self {
            Reason::LowConfidence => 1,
            Reason::LargeDisplacement => 2,
            Reason::ConfidenceOutlier => 3,
            Reason::DisplacementOutlier => 4,
            Reason::MissingLandmarks => 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suitability {
    pub reasons: Vec<Reason>,
}

impl Suitability {
    pub fn is_suitable(&self) -> bool {
        self.reasons.is_empty()
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Metrics for every frame plus population statistics over the frames
/// where each metric is defined.
pub fn compute_metrics(track: &LandmarkTrack) -> (Vec<FrameMetrics>, TrackStatistics) {
    let metrics: Vec<FrameMetrics> = track
        .frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let Some(f) = f else {
                return FrameMetrics {
                    frame: i,
                    confidence: None,
                    displacement: None,
                    face_size: None,
                };
            };
            let face_size = f.face_size();
            let prev = if i > 0 { track.frames[i - 1].as_ref() } else { None };
            let displacement = prev.map(|p| {
                let total: f64 = f
                    .points()
                    .iter()
                    .zip(p.points())
                    .map(|(a, b)| ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt())
                    .sum();
                let mean = total / f.points().len() as f64;
                if face_size > 0.0 {
                    mean / face_size
                } else if mean > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            });
            FrameMetrics {
                frame: i,
                confidence: Some(f.mean_confidence()),
                displacement,
                face_size: Some(face_size),
            }
        })
        .collect();
    let cs: Vec<f64> = metrics.iter().filter_map(|m| m.confidence).collect();
    let ds: Vec<f64> = metrics.iter().filter_map(|m| m.displacement).filter(|d| d.is_finite()).collect();
    let (mean_c, std_c) = mean_std(&cs);
    let (mean_d, std_d) = mean_std(&ds);
    (metrics, TrackStatistics { mean_c, std_c, mean_d, std_d })
}

/// Every triggered condition, in condition order.
pub fn classify_suitability(m: &FrameMetrics, stats: &TrackStatistics) -> Suitability {
    let Some(c) = m.confidence else {
        return Suitability {
            reasons: vec![Reason::MissingLandmarks],
        };
    };
    let d = m.displacement.unwrap_or(0.0);
    let mut reasons = Vec::new();
    if c < MIN_CONFIDENCE {
        reasons.push(Reason::LowConfidence);
    }
    if d > MAX_DISPLACEMENT {
        reasons.push(Reason::LargeDisplacement);
    }
    if c < OUTLIER_CONFIDENCE && c < stats.mean_c - OUTLIER_STDS * stats.std_c {
        reasons.push(Reason::ConfidenceOutlier);
    }
    if d > OUTLIER_DISPLACEMENT && d > stats.mean_d + OUTLIER_STDS * stats.std_d {
        reasons.push(Reason::DisplacementOutlier);
    }
    Suitability { reasons }
}

pub fn classify_track(metrics: &[FrameMetrics], stats: &TrackStatistics) -> Vec<Suitability> {
    metrics.iter().map(|m| classify_suitability(m, stats)).collect()
}
