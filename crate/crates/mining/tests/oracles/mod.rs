//! Hand-constructed 200-frame track (face size 100, confidence 0.9) with
//! planted violations:
//! frame 20 confidence 0.1 (conditions 1 and 3), frame 50 a permanent
//! 15 px shift (2 and 4), frame 100 confidence 0.5 (3), frame 150 a
//! further 5 px shift (4); scene cut at 120.

#![allow(dead_code)]

use vfd_mining::{LandmarkTrack, MiningConfig, MiningReport, Reason, Segment};

pub fn golden() -> LandmarkTrack {
    LandmarkTrack::read_jsonl(include_str!("../data/golden_track.jsonl").as_bytes()).unwrap()
}

pub const GOLDEN_CUTS: [usize; 1] = [120];
pub const GOLDEN_BUDGET: MiningConfig = MiningConfig { budget_lo: 90, budget_hi: 110 };

/// Hand-derived labels, statistics, segments and split of the golden track.
pub fn check_golden(report: &MiningReport) {
    // mean_c = (198 * 0.9 + 0.1 + 0.5) / 200; d is 0.15 and 0.05 once each over 199 frames
    let s = report.statistics;
    assert!((s.mean_c - 0.894).abs() < 1e-12);
    assert!((s.std_c - (0.8032f64 - 0.894 * 0.894).sqrt()).abs() < 1e-9);
    assert!((s.mean_d - 0.2 / 199.0).abs() < 1e-12);
    assert!((s.std_d - (0.025f64 / 199.0 - (0.2f64 / 199.0).powi(2)).sqrt()).abs() < 1e-9);

    assert_eq!(report.unsuitable_frames(), vec![20, 50, 100, 150]);
    let reasons = |i: usize| report.frames[i].reasons.clone();
    assert_eq!(reasons(20), vec![Reason::LowConfidence, Reason::ConfidenceOutlier]);
    assert_eq!(reasons(50), vec![Reason::LargeDisplacement, Reason::DisplacementOutlier]);
    assert_eq!(reasons(100), vec![Reason::ConfidenceOutlier]);
    assert_eq!(reasons(150), vec![Reason::DisplacementOutlier]);
    assert!((report.frames[50].metrics.displacement.unwrap() - 0.15).abs() < 1e-9);
    assert!((report.frames[150].metrics.displacement.unwrap() - 0.05).abs() < 1e-9);
    assert_eq!(report.frames[0].metrics.displacement, None);

    let seg = Segment::new;
    assert_eq!(
        report.segments,
        vec![seg(51, 99), seg(151, 199), seg(120, 149), seg(21, 49), seg(0, 19), seg(101, 119)]
    );
    assert_eq!(report.train, vec![seg(51, 99), seg(151, 199)]);
    assert_eq!(report.train_frames, 98);
    assert_eq!(report.test, vec![seg(120, 149), seg(21, 49), seg(0, 19), seg(101, 119)]);
    assert_eq!(report.shortfall, None);
}
