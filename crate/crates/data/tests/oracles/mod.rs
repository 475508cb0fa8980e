#![allow(dead_code)]

use std::collections::HashMap;

use vfd_data::*;

/// class -> subsets -> subjects -> sequence lengths
pub type Tree<'a> = &'a [(Class, &'a [&'a [&'a [usize]]])];

pub fn build(tree: Tree, margin: Margin) -> SplitManifest {
    SplitManifest {
        classes: tree
            .iter()
            .map(|(class, subsets)| ClassEntry {
                class: *class,
                subsets: subsets
                    .iter()
                    .enumerate()
                    .map(|(si, subjects)| SubsetEntry {
                        name: format!("s{si}"),
                        subjects: subjects
                            .iter()
                            .enumerate()
                            .map(|(ji, seqs)| SubjectEntry {
                                id: format!("p{ji}"),
                                sequences: seqs
                                    .iter()
                                    .enumerate()
                                    .map(|(qi, &n)| SequenceEntry {
                                        id: format!("q{qi}"),
                                        frames_dir: format!("{class:?}/{si}/{ji}/{qi}").into(),
                                        num_frames: n,
                                        fps: 25.0,
                                        source_video: None,
                                        crop_track: None,
                                        margin,
                                    })
                                    .collect(),
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect(),
    }
}

pub fn toy() -> SplitManifest {
    build(
        &[
            (Class::Real, &[&[&[12, 5], &[30]], &[&[7]]]),
            (Class::Fake, &[&[&[9], &[4, 4, 20]], &[&[15, 3]], &[&[6]]]),
        ],
        Margin::default(),
    )
}

/// Total variation between `sample_epoch` frequencies over at least
/// `draws` draws and `frame_weight`.
pub fn sampling_total_variation(m: &SplitManifest, draws: usize) -> f64 {
    let mut counts: HashMap<FrameRef, usize> = HashMap::new();
    let mut total = 0usize;
    let mut seed = 0;
    while total < draws {
        for r in sample_epoch(m, 1.0, seed).unwrap() {
            *counts.entry(r).or_default() += 1;
            total += 1;
        }
        seed += 1;
    }
    assert!(counts.keys().all(|r| frame_weight(m, r) > 0.0), "sampled a zero-weight frame");
    m.frames()
        .map(|r| (counts.get(&r).copied().unwrap_or(0) as f64 / total as f64 - frame_weight(m, &r)).abs())
        .sum::<f64>()
        / 2.0
}
