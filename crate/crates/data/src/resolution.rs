use vfd_media::{BBox, FrameSequence};

use crate::{DataError, Result};

/// Rescales a video so its time-averaged face-crop side becomes
/// `target_side`. Returns the resized video, the rescaled boxes and the
/// applied factor.
pub fn normalize_resolution(video: &FrameSequence, boxes: &[Option<BBox>], target_side: f64) -> Result<(FrameSequence, Vec<Option<BBox>>, f64)> {
    let sides: Vec<f64> = boxes.iter().flatten().map(|b| b.side).collect();
    if sides.is_empty() {
        return Err(DataError::Contract("crop track has no boxes".into()));
    }
    let mean = sides.iter().sum::<f64>() / sides.len() as f64;
    if !(mean > 0.0) || !(target_side > 0.0) {
        return Err(DataError::Contract(format!("cannot scale average crop side {mean} to {target_side}")));
    }
    let factor = target_side / mean;
    let Some(first) = video.frames.first() else {
        return Err(DataError::Contract("empty video".into()));
    };
    let (w, h) = (first.width(), first.height());
    let nw = ((w as f64 * factor).round() as usize).max(1);
    let nh = ((h as f64 * factor).round() as usize).max(1);
    let (fx, fy) = (nw as f64 / w as f64, nh as f64 / h as f64);
    let frames = if (nw, nh) == (w, h) {
        video.frames.clone()
    } else {
        video.frames.iter().map(|f| f.resize(nw, nh)).collect()
    };
    let boxes = boxes
        .iter()
        .map(|b| {
            b.map(|b| BBox {
                cx: b.cx * fx,
                cy: b.cy * fy,
                side: b.side * fx,
            })
        })
        .collect();
    Ok((FrameSequence::new(frames, video.fps), boxes, factor))
}
