//! Detector-input extraction: frame-rate conversion, temporally smoothed
//! constant-size face boxes and square crops.
//!
//! Box coordinates address pixel areas: pixel `(x, y)` covers
//! `[x, x+1) × [y, y+1)`, matching [`Image::crop_square`].

use serde::{Deserialize, Serialize};
use vfd_media::{source_position, BBox, FrameSequence, Image};

use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractConfig {
    pub target_fps: f64,
    /// Centered moving-average window for box smoothing (odd).
    pub smoothing_window: usize,
    pub output_size: usize,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            target_fps: 25.0,
            smoothing_window: 11,
            output_size: 299,
        }
    }
}

/// Per-frame square face boxes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CropTrack {
    pub boxes: Vec<Option<BBox>>,
    pub smoothed: bool,
}

impl CropTrack {
    /// Mean side over frames with a box; `None` when there are none.
    pub fn mean_side(&self) -> Option<f64> {
        let sides: Vec<f64> = self.boxes.iter().flatten().map(|b| b.side).collect();
        (!sides.is_empty()).then(|| sides.iter().sum::<f64>() / sides.len() as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtractedSequence {
    pub frames: FrameSequence,
    /// Index (after frame-rate conversion) of every emitted crop.
    pub source_indices: Vec<usize>,
    /// Converted-frame indices dropped for lack of a box.
    pub omitted: Vec<usize>,
    pub track: CropTrack,
}

/// Centered moving average of box centers and sides over the available
/// boxes in a `window`-frame neighbourhood (truncated at sequence ends);
/// frames without a box stay empty.
pub fn smooth_boxes(boxes: &[Option<BBox>], window: usize) -> Vec<Option<BBox>> {
    let r = window / 2;
    (0..boxes.len())
        .map(|i| {
            boxes[i]?;
            let lo = i.saturating_sub(r);
            let hi = (i + r).min(boxes.len() - 1);
            let near: Vec<&BBox> = boxes[lo..=hi].iter().flatten().collect();
            let n = near.len() as f64;
            Some(BBox {
                cx: near.iter().map(|b| b.cx).sum::<f64>() / n,
                cy: near.iter().map(|b| b.cy).sum::<f64>() / n,
                side: near.iter().map(|b| b.side).sum::<f64>() / n,
            })
        })
        .collect()
}

/// Boxes at the converted frame times: exact hits keep their box, in-between
/// times interpolate two neighbouring boxes, and a missing neighbour
/// leaves the frame without a box.
fn resample_boxes(boxes: &[Option<BBox>], from: f64, to: f64, count: usize) -> Vec<Option<BBox>> {
    if (from - to).abs() < 1e-9 {
        return boxes.to_vec();
    }
    (0..count)
        .map(|k| {
            let (i0, i1, w) = source_position(k, from, to, boxes.len());
            let a = boxes[i0]?;
            if w == 0.0 {
                return Some(a);
            }
            let b = boxes[i1]?;
            let w = w as f64;
            Some(BBox {
                cx: a.cx * (1.0 - w) + b.cx * w,
                cy: a.cy * (1.0 - w) + b.cy * w,
                side: a.side * (1.0 - w) + b.side * w,
            })
        })
        .collect()
}

pub fn extract_detector_frames(video: &FrameSequence, boxes: &[Option<BBox>], cfg: &ExtractConfig) -> Result<ExtractedSequence> {
    if boxes.len() != video.len() {
        return Err(crate::DataError::Contract(format!("{} boxes for {} frames", boxes.len(), video.len())));
    }
    let converted = video.resample(cfg.target_fps);
    let boxes = resample_boxes(boxes, video.fps, cfg.target_fps, converted.len());
    let smoothed = smooth_boxes(&boxes, cfg.smoothing_window.max(1));
    let side = smoothed.iter().flatten().map(|b| b.side).fold(0.0, f64::max);
    let mut frames = Vec::new();
    let mut source_indices = Vec::new();
    let mut omitted = Vec::new();
    for (i, (frame, b)) in converted.frames.iter().zip(&smoothed).enumerate() {
        match b {
            Some(b) => {
                frames.push(frame.crop_square(b.cx, b.cy, side, cfg.output_size));
                source_indices.push(i);
            }
            None => omitted.push(i),
        }
    }
    if frames.is_empty() {
        log::warn!("no face boxes in a sequence of {} frames; nothing extracted", converted.len());
    } else if !omitted.is_empty() {
        log::info!("omitted {} frames without a face box", omitted.len());
    }
    let track = CropTrack {
        boxes: smoothed.iter().map(|b| b.map(|b| BBox { side, ..b })).collect(),
        smoothed: true,
    };
    Ok(ExtractedSequence {
        frames: FrameSequence::new(frames, cfg.target_fps),
        source_indices,
        omitted,
        track,
    })
}

/// Crop one frame exactly as extraction does for a fixed box.
pub fn crop_frame(frame: &Image, b: &BBox, output_size: usize) -> Image {
    frame.crop_square(b.cx, b.cy, b.side, output_size)
}
