#![allow(dead_code)]

use std::path::PathBuf;

use vfd_data::{Class, ClassEntry, Margin, SequenceEntry, SplitManifest, SubjectEntry, SubsetEntry};
use vfd_train::{unweighted_accuracy, weighted_accuracy};

/// class -> subsets -> subjects -> sequence lengths
pub type Spec = [(Class, Vec<Vec<Vec<usize>>>)];

pub fn seq(id: &str, n: usize) -> SequenceEntry {
    SequenceEntry {
        id: id.into(),
        frames_dir: PathBuf::from(id),
        num_frames: n,
        fps: 25.0,
        source_video: None,
        crop_track: None,
        margin: Margin::default(),
    }
}

/// Tree given as class -> subsets -> subjects -> sequence lengths.
pub fn tree(spec: &Spec) -> SplitManifest {
    let mut k = 0;
    SplitManifest {
        classes: spec
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
                            .map(|(ji, lens)| SubjectEntry {
                                id: format!("j{ji}"),
                                sequences: lens
                                    .iter()
                                    .map(|&n| {
                                        k += 1;
                                        seq(&format!("q{k}"), n)
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

/// Enumerates every frame with its probability written out level by level.
pub fn oracle(spec: &Spec, predict: impl Fn(usize, usize) -> usize) -> f64 {
    let (mut hit, mut total) = (0.0, 0.0);
    let mut global = 0;
    for (class, subsets) in spec {
        for subjects in subsets {
            for lens in subjects {
                for &n in lens {
                    for f in 0..n {
                        let p = 1.0 / spec.len() as f64 / subsets.len() as f64 / subjects.len() as f64 / lens.len() as f64 / n as f64;
                        total += p;
                        if predict(global, f) == class.label() {
                            hit += p;
                        }
                    }
                    global += 1;
                }
            }
        }
    }
    hit / total
}

pub fn eval(t: &SplitManifest, predict: impl Fn(usize, usize) -> usize) -> (f64, f64) {
    let refs: Vec<_> = t.frames().collect();
    // sequences are numbered in tree order
    let mut index = std::collections::BTreeMap::new();
    for r in &refs {
        let n = index.len();
        index.entry((r.class, r.subset, r.subject, r.sequence)).or_insert(n);
    }
    let pred: Vec<usize> = refs.iter().map(|r| predict(index[&(r.class, r.subset, r.subject, r.sequence)], r.frame)).collect();
    (weighted_accuracy(t, &refs, &pred).unwrap(), unweighted_accuracy(t, &refs, &pred).unwrap())
}
