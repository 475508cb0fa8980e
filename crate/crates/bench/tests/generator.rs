use std::collections::BTreeSet;

use vfd_bench::*;
use vfd_data::{Class, Split};
use vfd_media::FrameSequence;
use vfd_mining::{classify_track, compute_metrics, Reason};
use vfd_model::signal::{highpass_clip, normalize_color, threshold_and_filter, RangeNorm, TemporalNoiseConfig};
use vfd_tensor::{Tape, Tensor};

fn small(fakes: &[FakeKind], subjects: usize, sequences: usize) -> CorpusConfig {
    let mut cfg = toy_corpus(fakes, true, 7);
    cfg.subjects = subjects;
    cfg.sequences = sequences;
    cfg
}

fn load(corpus: &Corpus, dir: &std::path::Path) -> FrameSequence {
    FrameSequence::load_dir(&corpus.root.join(dir), 25.0).unwrap()
}

#[test]
fn counts_classes_and_subsets() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate_corpus(&small(&[FakeKind::SpatialBlur], 4, 2), dir.path(), 2).unwrap();
    let real = corpus.sequences.iter().filter(|s| s.class == Class::Real).count();
    let fake = corpus.sequences.iter().filter(|s| s.class == Class::Fake).count();
    assert_eq!((real, fake), (8, 8));
    let m = corpus.manifest().unwrap();
    let mut total = 0;
    for (split, tree) in &m.splits {
        tree.validate().unwrap();
        let classes: BTreeSet<Class> = tree.classes.iter().map(|c| c.class).collect();
        assert_eq!(classes, BTreeSet::from([Class::Real, Class::Fake]), "{split}");
        total += tree.classes.iter().flat_map(|c| &c.subsets).flat_map(|s| &s.subjects).map(|j| j.sequences.len()).sum::<usize>();
    }
    assert_eq!(total, 16);
    // two backdrops give two subsets per class among the training subjects
    let train = m.split(Split::Train).unwrap();
    assert!(train.classes.iter().all(|c| c.subsets.len() >= 2));
    // every manifest frame exists
    let r = train.frames().next().unwrap();
    assert!(m.frame_path(Split::Train, &r).unwrap().exists());
}

#[test]
fn generation_is_deterministic_and_independent_of_jobs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = small(&[FakeKind::TemporalFlicker, FakeKind::ColorShift], 3, 1);
    let ca = generate_corpus(&cfg, a.path(), 1).unwrap();
    let cb = generate_corpus(&cfg, b.path(), 3).unwrap();
    assert_eq!(ca.sequences, cb.sequences);
    for s in &ca.sequences {
        for sub in [&s.scene_dir, &s.crop_dir] {
            let fa = load(&ca, sub);
            let fb = load(&cb, sub);
            assert_eq!(fa.frames, fb.frames, "{}", sub.display());
        }
        let ta = std::fs::read(a.path().join(&s.track)).unwrap();
        assert_eq!(ta, std::fs::read(b.path().join(&s.track)).unwrap());
    }
    assert_eq!(
        std::fs::read(a.path().join(MANIFEST_FILE)).unwrap(),
        std::fs::read(b.path().join(MANIFEST_FILE)).unwrap()
    );
    let c = tempfile::tempdir().unwrap();
    let other = generate_corpus(&CorpusConfig { seed: 8, ..cfg }, c.path(), 1).unwrap();
    let s = &ca.sequences[0];
    assert_ne!(load(&other, &s.scene_dir).frames, load(&ca, &s.scene_dir).frames, "seed changes the clips");
}

fn pair<'a>(corpus: &'a Corpus, kind: FakeKind) -> Vec<(&'a SequenceRecord, &'a SequenceRecord)> {
    corpus
        .sequences
        .iter()
        .filter(|s| s.fake == Some(kind))
        .map(|f| {
            let r = corpus
                .sequences
                .iter()
                .find(|r| r.class == Class::Real && r.subject == f.subject && r.sequence == f.sequence)
                .unwrap();
            (r, f)
        })
        .collect()
}

/// Mean temporal noise of two clips under one shared step-3 normalization.
fn temporal_energy(real: &FrameSequence, fake: &FrameSequence) -> (f64, f64) {
    let cfg = TemporalNoiseConfig::default();
    let to_t = |s: &FrameSequence| -> Vec<Tensor<f64>> { s.frames.iter().map(normalize_color::<f64>).collect() };
    let (ar, af) = (highpass_clip(&to_t(real), &cfg).unwrap(), highpass_clip(&to_t(fake), &cfg).unwrap());
    let norm = RangeNorm::from_batch(ar.iter().chain(&af), cfg.norm_eps);
    let energy = |a: &[Tensor<f64>]| {
        let mut tape = Tape::new();
        let t = tape.constant(Tensor::scalar(cfg.threshold_init));
        let vars: Vec<_> = a.iter().map(|x| tape.constant(norm.apply(x))).collect();
        let out = threshold_and_filter(&mut tape, &vars, t, &cfg).unwrap();
        let n = out.len() as f64;
        out.iter().map(|&v| tape.value(v).data().iter().sum::<f64>() / tape.value(v).numel() as f64).sum::<f64>() / n
    };
    (energy(&ar), energy(&af))
}

#[test]
fn flicker_preserves_frame_statistics_and_raises_temporal_energy() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate_corpus(&small(&[FakeKind::TemporalFlicker], 4, 1), dir.path(), 1).unwrap();
    let mut real_frames = Vec::new();
    let mut fake_frames = Vec::new();
    for (r, f) in pair(&corpus, FakeKind::TemporalFlicker) {
        let (rv, fv) = (load(&corpus, &r.scene_dir), load(&corpus, &f.scene_dir));
        for (a, b) in rv.frames.iter().zip(&fv.frames) {
            assert!((a.mean() - b.mean()).abs() < 1e-3, "{} vs {}", a.mean(), b.mean());
            assert!((a.variance() - b.variance()).abs() < 1e-3);
            assert!(a.mse(b) > 1e-5, "flicker changes pixels");
        }
        let (er, ef) = temporal_energy(&load(&corpus, &r.crop_dir), &load(&corpus, &f.crop_dir));
        assert!(ef > er, "{}: real {er} fake {ef}", f.id);
        real_frames.extend(rv.frames);
        fake_frames.extend(fv.frames);
        assert_eq!(f.flicker.len(), corpus.config.scene.frames);
    }
    assert!(frame_statistics_probe(&real_frames, &fake_frames) <= 0.55);
}

#[test]
fn spatial_fakes_change_only_the_face() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate_corpus(&small(&[FakeKind::SpatialBlur, FakeKind::ColorShift], 3, 1), dir.path(), 1).unwrap();
    for kind in [FakeKind::SpatialBlur, FakeKind::ColorShift] {
        for (r, f) in pair(&corpus, kind) {
            let (rv, fv) = (load(&corpus, &r.scene_dir), load(&corpus, &f.scene_dir));
            let (a, b) = (&rv.frames[0], &fv.frames[0]);
            // corners are background
            for (x, y) in [(0, 0), (a.width() - 1, 0), (0, a.height() - 1)] {
                for c in 0..3 {
                    assert_eq!(a.get(c, x, y), b.get(c, x, y));
                }
            }
            assert!(a.mse(b) > 1e-6, "{kind} must alter the face");
        }
    }
}

#[test]
fn injected_low_confidence_frames_are_exactly_the_condition_one_frames() {
    let mut cfg = small(&[FakeKind::SpatialBlur], 3, 1);
    cfg.scene.frames = 60;
    cfg.low_confidence_frames = 10;
    cfg.displaced_frames = 0;
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate_corpus(&cfg, dir.path(), 1).unwrap();
    for s in corpus.sequences.iter().filter(|s| s.class == Class::Real) {
        assert_eq!(s.low_confidence.len(), 10);
        let track = load_track(&corpus, s).unwrap();
        let (metrics, stats) = compute_metrics(&track);
        let suit = classify_track(&metrics, &stats);
        let unsuitable: Vec<usize> = (0..suit.len()).filter(|&i| !suit[i].is_suitable()).collect();
        assert_eq!(unsuitable, s.low_confidence);
        for &i in &s.low_confidence {
            assert!(suit[i].reasons.contains(&Reason::LowConfidence));
        }
    }
}

#[test]
fn displaced_frames_trip_the_displacement_condition() {
    let mut cfg = small(&[FakeKind::SpatialBlur], 3, 1);
    cfg.scene.frames = 40;
    cfg.low_confidence_frames = 0;
    cfg.displaced_frames = 2;
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate_corpus(&cfg, dir.path(), 1).unwrap();
    let s = corpus.sequences.iter().find(|s| s.class == Class::Real).unwrap();
    let track = load_track(&corpus, s).unwrap();
    let (metrics, stats) = compute_metrics(&track);
    let suit = classify_track(&metrics, &stats);
    for &i in &s.displaced {
        // the jump in and the jump back
        assert!(suit[i].reasons.contains(&Reason::LargeDisplacement));
        assert!(suit[i + 1].reasons.contains(&Reason::LargeDisplacement));
    }
    let expected: BTreeSet<usize> = s.displaced.iter().flat_map(|&i| [i, i + 1]).collect();
    let got: BTreeSet<usize> = (0..suit.len()).filter(|&i| !suit[i].is_suitable()).collect();
    assert_eq!(got, expected);
}

#[test]
fn splits_are_subject_disjoint() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate_corpus(&small(&[FakeKind::ColorShift], 5, 1), dir.path(), 1).unwrap();
    let (tr, va, te) = (corpus.subjects(Split::Train), corpus.subjects(Split::Val), corpus.subjects(Split::Test));
    assert_eq!((tr.len(), va.len(), te.len()), (3, 1, 1));
    assert!(tr.is_disjoint(&te) && tr.is_disjoint(&va) && va.is_disjoint(&te));
    let back = Corpus::load(dir.path()).unwrap();
    assert_eq!(back.sequences, corpus.sequences);
    // restricting training identities keeps the tree valid
    let m = corpus.manifest().unwrap();
    let r = restrict_train_subjects(&m, 1).unwrap();
    let ids: BTreeSet<String> = r.split(Split::Train).unwrap().classes.iter().flat_map(|c| &c.subsets).flat_map(|s| &s.subjects).map(|j| j.id.clone()).collect();
    assert_eq!(ids.len(), 1);
    r.split(Split::Train).unwrap().validate().unwrap();
}

#[test]
fn invalid_configs_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(&[FakeKind::ColorShift], 2, 1);
    assert!(generate_corpus(&cfg, dir.path(), 1).is_err());
    cfg.subjects = 3;
    cfg.fakes.clear();
    assert!(generate_corpus(&cfg, dir.path(), 1).is_err());
}

proptest::proptest! {
    #[test]
    fn flicker_frame_matches_reference_moments(seed in 0u64..10_000, sign in proptest::bool::ANY, strength in 0.0f64..0.2) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (w, h) = (9, 7);
        let noisy = vfd_media::Image::from_fn(w, h, |_, _, _| rng.gen_range(0.1..0.9));
        let reference = vfd_media::Image::from_fn(w, h, |_, _, _| rng.gen_range(0.1..0.9));
        let mask: Vec<f32> = (0..w * h).map(|i| if i % 3 == 0 { 1.0 } else { rng.gen::<f32>() }).collect();
        let out = vfd_bench::fakes::flicker_frame(&noisy, &mask, if sign { 1.0 } else { -1.0 }, strength, &reference);
        proptest::prop_assert!((out.mean() - reference.mean()).abs() < 1e-5);
        proptest::prop_assert!((out.variance() - reference.variance()).abs() < 1e-5);
    }
}
