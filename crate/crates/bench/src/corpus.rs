//! Corpus generation: paired real/fake clips per subject, their landmark
//! tracks, detector crops and the dataset manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use vfd_data::{
    encoder_from_env, extract_detector_frames, Class, ClassEntry, CompressionPipeline, DatasetManifest, ExtractConfig, Margin, Quality,
    SequenceEntry, Split, SplitManifest, Stage, SubjectEntry, SubsetEntry,
};
use vfd_media::{BBox, FrameSequence, Image};
use vfd_mining::{crop_box, LandmarkTrack};
use vfd_model::signal::{WINDOW_LEAD, WINDOW_TRAIL};

use crate::fakes::{apply_spatial, flicker_frame, flicker_signs, FakeKind, FakeRecipe};
use crate::scene::{landmark_track, render_clip, stream_rng, Backdrop, SyntheticSceneConfig, Subject};
use crate::{BenchError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompressionSettings {
    pub quality: Quality,
    /// Time-average face crop side after resolution normalization.
    pub target_side: f64,
    /// Fail instead of falling back to the stub encoder.
    pub strict_encoder: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusConfig {
    pub scene: SyntheticSceneConfig,
    pub fakes: Vec<FakeRecipe>,
    pub subjects: usize,
    pub sequences: usize,
    /// The last `val_subjects + test_subjects` subjects form the
    /// validation and test splits; the others train.
    pub val_subjects: usize,
    pub test_subjects: usize,
    /// Side of the detector crops.
    pub crop_size: usize,
    /// Crop side over the landmark bounding-box side.
    pub crop_margin: f64,
    /// Frames per track whose confidence is forced to 0.1.
    pub low_confidence_frames: usize,
    /// Frames per track whose landmarks jump by 15% of the face size.
    pub displaced_frames: usize,
    pub compression: Option<CompressionSettings>,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            scene: SyntheticSceneConfig::default(),
            fakes: vec![FakeRecipe::new(FakeKind::TemporalFlicker)],
            subjects: 18,
            sequences: 2,
            val_subjects: 3,
            test_subjects: 3,
            crop_size: 64,
            crop_margin: 1.3,
            low_confidence_frames: 2,
            displaced_frames: 1,
            compression: None,
            seed: 0,
        }
    }
}

impl CorpusConfig {
    pub fn with_fakes(mut self, kinds: &[FakeKind]) -> Self {
        self.fakes = kinds.iter().map(|&k| FakeRecipe::new(k)).collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(BenchError::Contract(m));
        if self.fakes.is_empty() {
            return fail("at least one fake recipe is required".into());
        }
        if self.subjects < self.val_subjects + self.test_subjects + 1 || self.val_subjects == 0 || self.test_subjects == 0 {
            return fail(format!(
                "{} subjects cannot cover {} validation, {} test and at least one training subject",
                self.subjects, self.val_subjects, self.test_subjects
            ));
        }
        if self.sequences == 0 {
            return fail("subjects need at least one sequence".into());
        }
        if self.scene.frames < WINDOW_LEAD + WINDOW_TRAIL + 1 {
            return fail(format!("clips need more than {} frames", WINDOW_LEAD + WINDOW_TRAIL));
        }
        let injected = self.low_confidence_frames + self.displaced_frames;
        if 2 * injected + 2 > self.scene.frames {
            return fail(format!("{injected} injected frames do not fit into {} frames", self.scene.frames));
        }
        if self.crop_size < 8 || self.scene.width < 16 || self.scene.height < 16 {
            return fail("frame and crop sizes are too small".into());
        }
        Ok(())
    }

    pub fn split_of(&self, subject: usize) -> Split {
        let train = self.subjects - self.val_subjects - self.test_subjects;
        if subject < train {
            Split::Train
        } else if subject < train + self.val_subjects {
            Split::Val
        } else {
            Split::Test
        }
    }

    pub fn backdrop_of(&self, subject: usize) -> Backdrop {
        Backdrop::ALL[subject % Backdrop::ALL.len()]
    }
}

/// One generated sequence; paths are relative to the corpus root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub id: String,
    pub subject: String,
    pub sequence: usize,
    pub split: Split,
    pub class: Class,
    /// `None` for real clips.
    pub fake: Option<FakeKind>,
    pub backdrop: Backdrop,
    pub scene_dir: PathBuf,
    pub crop_dir: PathBuf,
    pub track: PathBuf,
    pub low_confidence: Vec<usize>,
    pub displaced: Vec<usize>,
    /// Per-frame offsets of a flicker fake.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flicker: Vec<f32>,
    /// Preparation stages, when the compression pipeline ran.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<Stage>,
}

/// Index written next to the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub config: CorpusConfig,
    pub sequences: Vec<SequenceRecord>,
    #[serde(skip)]
    pub root: PathBuf,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const INDEX_FILE: &str = "corpus.json";

impl Corpus {
    pub fn manifest_path(&self) -> PathBuf {
        self.root.join(MANIFEST_FILE)
    }

    pub fn manifest(&self) -> Result<DatasetManifest> {
        Ok(DatasetManifest::load(&self.manifest_path())?)
    }

    pub fn load(root: &Path) -> Result<Self> {
        let path = root.join(INDEX_FILE);
        let text = fs::read_to_string(&path).map_err(crate::io_err(&path))?;
        let mut c: Corpus = serde_json::from_str(&text).map_err(|e| BenchError::Format(format!("{}: {e}", path.display())))?;
        c.root = root.to_path_buf();
        Ok(c)
    }

    /// Subject ids present in a split.
    pub fn subjects(&self, split: Split) -> std::collections::BTreeSet<String> {
        self.sequences.iter().filter(|s| s.split == split).map(|s| s.subject.clone()).collect()
    }
}

fn subject_id(j: usize) -> String {
    format!("s{j:02}")
}

fn noise_field(len: usize, sigma: f64, rng: &mut impl Rng) -> Vec<f32> {
    let normal = Normal::new(0.0, sigma.max(0.0)).expect("finite sigma");
    (0..len).map(|_| normal.sample(rng) as f32).collect()
}

fn with_noise(frame: &Image, noise: &[f32], clamp: bool) -> Image {
    let mut out = frame.clone();
    for (v, n) in out.data_mut().iter_mut().zip(noise) {
        *v += n;
        if clamp {
            *v = v.clamp(0.0, 1.0);
        }
    }
    out
}

/// Picks `low + displaced` distinct frames, none adjacent to another and
/// none at frame 0.
fn injection_frames(n: usize, low: usize, displaced: usize, rng: &mut impl Rng) -> (Vec<usize>, Vec<usize>) {
    // frames 1, 3, 5, ... keep every pick at least two apart
    let slots = (n - 1) / 2;
    let picks: Vec<usize> = sample(rng, slots, low + displaced).into_iter().map(|s| 1 + 2 * s).collect();
    let mut lo = picks[..low].to_vec();
    let mut di = picks[low..].to_vec();
    lo.sort_unstable();
    di.sort_unstable();
    (lo, di)
}

struct Generated {
    records: Vec<SequenceRecord>,
}

fn generate_subject_sequence(cfg: &CorpusConfig, root: &Path, j: usize, q: usize) -> Result<Generated> {
    let subject = Subject::random(&cfg.scene, &mut stream_rng(cfg.seed, &[0, j as u64]));
    let backdrop = cfg.backdrop_of(j);
    let split = cfg.split_of(j);
    let clip = render_clip(&cfg.scene, &subject, backdrop, &mut stream_rng(cfg.seed, &[1, j as u64, q as u64]));
    let mut track_rng = stream_rng(cfg.seed, &[2, j as u64, q as u64]);
    let mut track = landmark_track(&clip, &cfg.scene, &mut track_rng);
    let (low, displaced) = injection_frames(cfg.scene.frames, cfg.low_confidence_frames, cfg.displaced_frames, &mut track_rng);
    for &k in &low {
        let f = track.frames[k].as_ref().expect("generated tracks are complete");
        track.frames[k] = Some(f.with_confidence(0.1));
    }
    for &k in &displaced {
        let f = track.frames[k].as_ref().expect("generated tracks are complete");
        let jump = 0.15 * f.face_size();
        track.frames[k] = Some(f.translated(jump, 0.0));
    }
    let base = format!("{}-q{q}", subject_id(j));
    let track_rel = PathBuf::from("tracks").join(format!("{base}.jsonl"));
    let tracks_dir = root.join("tracks");
    fs::create_dir_all(&tracks_dir).map_err(crate::io_err(&tracks_dir))?;
    track.save(&root.join(&track_rel))?;
    let boxes: Vec<Option<BBox>> = track.frames.iter().map(|f| f.as_ref().map(|f| crop_box(f, cfg.crop_margin))).collect();

    let mut noise_rng = stream_rng(cfg.seed, &[3, j as u64, q as u64]);
    let plane = cfg.scene.width * cfg.scene.height * 3;
    let noise: Vec<Vec<f32>> = (0..cfg.scene.frames).map(|_| noise_field(plane, cfg.scene.noise_sigma, &mut noise_rng)).collect();
    let real: Vec<Image> = clip.frames.iter().zip(&noise).map(|(f, n)| with_noise(f, n, true)).collect();

    let mut videos: Vec<(Class, Option<FakeKind>, Vec<Image>, Vec<f32>)> = vec![(Class::Real, None, real.clone(), Vec::new())];
    for (r, recipe) in cfg.fakes.iter().enumerate() {
        let (frames, signs) = match recipe.kind {
            FakeKind::TemporalFlicker => {
                let signs = flicker_signs(cfg.scene.frames, &mut stream_rng(cfg.seed, &[4, j as u64, q as u64, r as u64]));
                let frames = (0..cfg.scene.frames)
                    .map(|k| {
                        let noisy = with_noise(&clip.frames[k], &noise[k], false);
                        let mut f = flicker_frame(&noisy, &clip.masks[k], signs[k], recipe.strength, &real[k]);
                        f.clamp_unit();
                        f
                    })
                    .collect();
                let offsets = signs.iter().map(|s| s * recipe.strength as f32).collect();
                (frames, offsets)
            }
            _ => (
                (0..cfg.scene.frames)
                    .map(|k| with_noise(&apply_spatial(recipe, &clip.frames[k], &clip.masks[k]), &noise[k], true))
                    .collect(),
                Vec::new(),
            ),
        };
        videos.push((Class::Fake, Some(recipe.kind), frames, signs));
    }

    let extract = ExtractConfig {
        target_fps: cfg.scene.fps,
        output_size: cfg.crop_size,
        ..ExtractConfig::default()
    };
    let mut records = Vec::new();
    for (class, fake, frames, flicker) in videos {
        let id = match fake {
            None => format!("real-{base}"),
            Some(k) => format!("{}-{base}", k.name()),
        };
        let video = FrameSequence::new(frames, cfg.scene.fps);
        let scene_dir = PathBuf::from("scenes").join(&id);
        video.save_dir(&root.join(&scene_dir))?;
        let (crops, trace) = match &cfg.compression {
            None => (extract_detector_frames(&video, &boxes, &extract)?, Vec::new()),
            Some(c) => {
                let encoder = encoder_from_env(c.strict_encoder)?;
                let pipeline = CompressionPipeline {
                    target_side: c.target_side,
                    quality: c.quality,
                    extract: extract.clone(),
                };
                let out = pipeline.run(&video, &boxes, encoder.as_ref())?;
                (out.extracted, out.trace)
            }
        };
        if !crops.omitted.is_empty() || crops.frames.len() != cfg.scene.frames {
            return Err(BenchError::Contract(format!("sequence {id}: {} crops for {} frames", crops.frames.len(), cfg.scene.frames)));
        }
        let crop_dir = PathBuf::from("crops").join(&id);
        crops.frames.save_dir(&root.join(&crop_dir))?;
        records.push(SequenceRecord {
            id,
            subject: subject_id(j),
            sequence: q,
            split,
            class,
            fake,
            backdrop,
            scene_dir,
            crop_dir,
            track: track_rel.clone(),
            low_confidence: low.clone(),
            displaced: displaced.clone(),
            flicker,
            trace,
        });
    }
    Ok(Generated { records })
}

fn subset_name(class: Class, fake: Option<FakeKind>, backdrop: Backdrop) -> String {
    match (class, fake) {
        (Class::Fake, Some(k)) => format!("{}-{}", k.name(), backdrop.name()),
        _ => backdrop.name().to_string(),
    }
}

/// Builds the split trees: class, then subset (backdrop, and fake kind for
/// fakes), then subject, then sequence.
pub fn build_manifest(cfg: &CorpusConfig, records: &[SequenceRecord]) -> DatasetManifest {
    let mut tree: BTreeMap<Split, BTreeMap<Class, BTreeMap<String, BTreeMap<String, Vec<SequenceEntry>>>>> = BTreeMap::new();
    for r in records {
        let entry = SequenceEntry {
            id: r.id.clone(),
            frames_dir: r.crop_dir.clone(),
            num_frames: cfg.scene.frames,
            fps: cfg.scene.fps,
            source_video: Some(r.scene_dir.display().to_string()),
            crop_track: Some(r.track.clone()),
            margin: Margin {
                lead: WINDOW_LEAD,
                trail: WINDOW_TRAIL,
            },
        };
        tree.entry(r.split)
            .or_default()
            .entry(r.class)
            .or_default()
            .entry(subset_name(r.class, r.fake, r.backdrop))
            .or_default()
            .entry(r.subject.clone())
            .or_default()
            .push(entry);
    }
    let splits = tree
        .into_iter()
        .map(|(split, classes)| {
            let classes = classes
                .into_iter()
                .map(|(class, subsets)| ClassEntry {
                    class,
                    subsets: subsets
                        .into_iter()
                        .map(|(name, subjects)| SubsetEntry {
                            name,
                            subjects: subjects.into_iter().map(|(id, sequences)| SubjectEntry { id, sequences }).collect(),
                        })
                        .collect(),
                })
                .collect();
            (split, SplitManifest { classes })
        })
        .collect();
    DatasetManifest {
        splits,
        root: PathBuf::new(),
    }
}

/// Generates the corpus under `root` with up to `jobs` sequences in
/// flight. Output is identical for any `jobs`.
pub fn generate_corpus(cfg: &CorpusConfig, root: &Path, jobs: usize) -> Result<Corpus> {
    cfg.validate()?;
    fs::create_dir_all(root).map_err(crate::io_err(root))?;
    let tasks: Vec<(usize, usize)> = (0..cfg.subjects).flat_map(|j| (0..cfg.sequences).map(move |q| (j, q))).collect();
    let slots: Vec<Mutex<Option<Result<Generated>>>> = tasks.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, tasks.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(j, q)) = tasks.get(i) else { break };
                *slots[i].lock().expect("slot") = Some(generate_subject_sequence(cfg, root, j, q));
            });
        }
    });
    let mut sequences = Vec::new();
    for slot in slots {
        sequences.extend(slot.into_inner().expect("slot").expect("every task ran")?.records);
    }
    let mut manifest = build_manifest(cfg, &sequences);
    manifest.root = root.to_path_buf();
    manifest.save(&root.join(MANIFEST_FILE))?;
    let corpus = Corpus {
        config: cfg.clone(),
        sequences,
        root: root.to_path_buf(),
    };
    let index = root.join(INDEX_FILE);
    fs::write(&index, serde_json::to_string_pretty(&corpus).expect("index serializes")).map_err(crate::io_err(&index))?;
    log::info!("generated {} sequences under {}", corpus.sequences.len(), root.display());
    Ok(corpus)
}

/// Loads the landmark track of a record.
pub fn load_track(corpus: &Corpus, r: &SequenceRecord) -> Result<LandmarkTrack> {
    Ok(LandmarkTrack::load(&corpus.root.join(&r.track))?)
}
