//! Reference scene-cut detector: L1 distance between normalized 64-bin
//! luminance histograms of consecutive frames.

use vfd_media::Image;

pub const HISTOGRAM_BINS: usize = 64;
pub const DEFAULT_CUT_THRESHOLD: f64 = 0.5;

/// Normalized histogram of Rec. 601 luma.
pub fn luminance_histogram(img: &Image) -> [f64; HISTOGRAM_BINS] {
    let mut h = [0.0; HISTOGRAM_BINS];
    let n = img.width() * img.height();
    if n == 0 {
        return h;
    }
    for y in 0..img.height() {
        for x in 0..img.width() {
            let l = 0.299 * img.get(0, x, y) as f64 + 0.587 * img.get(1, x, y) as f64 + 0.114 * img.get(2, x, y) as f64;
            let bin = ((l.clamp(0.0, 1.0) * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
            h[bin] += 1.0;
        }
    }
    h.iter_mut().for_each(|v| *v /= n as f64);
    h
}

pub fn histogram_distance(a: &[f64; HISTOGRAM_BINS], b: &[f64; HISTOGRAM_BINS]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Indices `k` whose frame starts a new scene (distance to frame `k-1`
/// above `threshold`).
pub fn detect_scene_cuts(frames: &[Image], threshold: f64) -> Vec<usize> {
    let hists: Vec<_> = frames.iter().map(luminance_histogram).collect();
    (1..hists.len())
        .filter(|&k| histogram_distance(&hists[k - 1], &hists[k]) > threshold)
        .collect()
}
