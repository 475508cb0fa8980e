//! Runs of suitable frames and greedy training-budget selection.

use serde::{Deserialize, Serialize};

/// Inclusive frame range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn new(start: usize, end: usize) -> Self {
        assert!(start <= end, "segment {start}..={end} is empty");
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, frame: usize) -> bool {
        (self.start..=self.end).contains(&frame)
    }

    pub fn frames(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

fn by_length(segments: &mut [Segment]) {
    segments.sort_by(|a, b| b.len().cmp(&a.len()).then(a.start.cmp(&b.start)));
}

/// Maximal runs of suitable frames. A scene cut at index `k` separates
/// frames `k-1` and `k`. Sorted by length (longest first, earlier start on
/// ties).
pub fn extract_segments(suitable: &[bool], scene_cuts: &[usize]) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, &ok) in suitable.iter().enumerate() {
        if let Some(s) = start {
            if !ok || scene_cuts.contains(&i) {
                out.push(Segment::new(s, i - 1));
                start = None;
            }
        }
        if ok && start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Segment::new(s, suitable.len() - 1));
    }
    by_length(&mut out);
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub train: Vec<Segment>,
    pub test: Vec<Segment>,
    pub train_frames: usize,
    /// Frames missing to reach the lower budget, when it cannot be met.
    pub shortfall: Option<usize>,
}

/// Takes the longest segments until at least `lo` frames are selected.
/// A segment that would push the total past `hi` is split: its leading
/// part fills the budget up to `hi` and the rest returns to the test pool.
pub fn select_training_frames(segments: &[Segment], lo: usize, hi: usize) -> Selection {
    assert!(lo <= hi, "budget {lo}..{hi} is inverted");
    let mut sorted = segments.to_vec();
    by_length(&mut sorted);
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut total = 0;
    for seg in sorted {
        if total >= lo {
            test.push(seg);
        } else if total + seg.len() > hi {
            let take = hi - total;
            train.push(Segment::new(seg.start, seg.start + take - 1));
            test.push(Segment::new(seg.start + take, seg.end));
            total = hi;
        } else {
            total += seg.len();
            train.push(seg);
        }
    }
    by_length(&mut test);
    let shortfall = (total < lo).then(|| lo - total);
    if let Some(missing) = shortfall {
        log::warn!("only {total} suitable frames for a budget of {lo}..{hi} ({missing} short)");
    }
    Selection {
        train,
        test,
        train_frames: total,
        shortfall,
    }
}
