//! Named experiments at toy scale. Each generates its corpora, trains the
//! variants it compares and reports weighted test accuracy.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vfd_data::{DatasetManifest, Quality, Split, Stage};
use vfd_model::signal::TemporalNoiseConfig;
use vfd_model::Variant;
use vfd_train::{run_experiment, ExperimentData, ModelConfig, StoppingPolicy, TrainConfig};

use crate::corpus::{generate_corpus, CompressionSettings, Corpus, CorpusConfig};
use crate::fakes::FakeKind;
use crate::scene::SyntheticSceneConfig;
use crate::{BenchError, Result};

pub const RECIPES: [&str; 4] = ["main", "ablation", "compression", "identity_holdout"];

#[derive(Clone, Debug)]
pub struct RecipeOptions {
    /// Smaller corpora, narrower models and fewer epochs.
    pub quick: bool,
    /// Independent training runs per row; `None` picks 3 (1 when quick).
    pub seeds: Option<usize>,
    pub jobs: usize,
    /// Corpora and run records go here.
    pub work_dir: PathBuf,
    pub corpus_seed: u64,
    /// Compression settings override for the compression recipe.
    pub quality: Quality,
    pub target_side: f64,
    pub strict_encoder: bool,
}

impl RecipeOptions {
    pub fn new(work_dir: impl Into<PathBuf>) -> Self {
        Self {
            quick: false,
            seeds: None,
            jobs: 1,
            work_dir: work_dir.into(),
            corpus_seed: 0,
            quality: Quality::Crf(23),
            target_side: 258.0,
            strict_encoder: false,
        }
    }

    fn seeds(&self) -> usize {
        self.seeds.unwrap_or(if self.quick { 1 } else { 3 })
    }
}

/// Corpus used by the toy experiments.
pub fn toy_corpus(fakes: &[FakeKind], quick: bool, seed: u64) -> CorpusConfig {
    let mut cfg = CorpusConfig {
        seed,
        ..CorpusConfig::default()
    }
    .with_fakes(fakes);
    if quick {
        cfg.subjects = 4;
        cfg.sequences = 1;
        cfg.val_subjects = 1;
        cfg.test_subjects = 1;
        cfg.crop_size = 32;
        cfg.scene = SyntheticSceneConfig {
            width: 64,
            height: 48,
            frames: 16,
            face_scale: (8.5, 10.0),
            motion: 2.0,
            texture_cell: 1.0,
            ..SyntheticSceneConfig::default()
        };
        cfg.low_confidence_frames = 1;
        cfg.displaced_frames = 1;
    }
    cfg
}

/// Detector configuration of the toy experiments.
pub fn toy_model(variant: Variant, quick: bool) -> ModelConfig {
    ModelConfig {
        variant,
        width_scale: if quick { 1.0 / 16.0 } else { 1.0 / 8.0 },
        input_size: if quick { 32 } else { 64 },
        middle_repeats: quick.then_some(2),
    }
}

/// Training settings of the toy experiments: about ten steps per epoch
/// and at most 30 epochs.
pub fn toy_training(quick: bool) -> TrainConfig {
    TrainConfig {
        batch_size: 24,
        train_rate: if quick { 0.5 } else { 0.25 },
        val_rate: 0.2,
        seed: 0,
        stopping: StoppingPolicy::Threshold {
            max_epochs: if quick { 2 } else { 30 },
            threshold: 0.99,
            count: 5,
        },
        ..TrainConfig::default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub corpus: String,
    pub variant: Variant,
    pub train_subjects: usize,
    /// Weighted test accuracy of each seed.
    pub accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub epochs: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecipeReport {
    pub recipe: String,
    pub rows: Vec<ReportRow>,
    /// Preparation stages of one compressed sequence.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<Stage>,
    /// Identities shared by the training and test splits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identity_overlap: Option<Vec<String>>,
}

impl RecipeReport {
    /// Plain-text comparison table.
    pub fn render(&self) -> String {
        let mut s = format!("recipe: {}\n", self.recipe);
        let _ = writeln!(s, "{:<28} {:<7} {:>6} {:>9}  per-seed", "corpus", "variant", "ids", "accuracy");
        for r in &self.rows {
            let seeds: Vec<String> = r.accuracies.iter().map(|a| format!("{a:.4}")).collect();
            let _ = writeln!(
                s,
                "{:<28} {:<7} {:>6} {:>9.4}  {}",
                r.corpus,
                r.variant.to_string(),
                r.train_subjects,
                r.mean_accuracy,
                seeds.join(" ")
            );
        }
        if !self.trace.is_empty() {
            let order: Vec<&str> = self.trace.iter().map(|t| t.name.as_str()).collect();
            let _ = writeln!(s, "preparation order: {}", order.join(" -> "));
            for t in &self.trace {
                let _ = writeln!(s, "  {:<24} {:?} -> {:?}  {}", t.name, t.input_size, t.output_size, t.detail);
            }
        }
        if let Some(o) = &self.identity_overlap {
            let _ = writeln!(s, "train/test identity overlap: {}", if o.is_empty() { "none".to_string() } else { o.join(", ") });
        }
        s
    }
}

/// Runs a named recipe.
pub fn run_recipe(name: &str, opts: &RecipeOptions) -> Result<RecipeReport> {
    match name {
        "main" => main_recipe(opts),
        "ablation" => ablation_recipe(opts),
        "compression" => compression_recipe(opts),
        "identity_holdout" => identity_recipe(opts),
        other => Err(BenchError::UnknownRecipe {
            name: other.to_string(),
            available: RECIPES.join(", "),
        }),
    }
}

fn fake_label(fakes: &[FakeKind]) -> String {
    fakes.iter().map(|k| k.name()).collect::<Vec<_>>().join("+")
}

/// Trains `variant` on an existing corpus and returns one report row.
pub fn train_row(
    manifest: &DatasetManifest,
    label: &str,
    variant: Variant,
    opts: &RecipeOptions,
    seeds: usize,
) -> Result<ReportRow> {
    let model = toy_model(variant, opts.quick);
    let temporal = TemporalNoiseConfig::default();
    let training = toy_training(opts.quick);
    let data = ExperimentData::load(manifest, &model.spec(), &temporal)?;
    let out = opts.work_dir.join("runs").join(format!("{label}-{variant}"));
    let report = run_experiment(&model, &temporal, &training, seeds, &data, Some(&out), opts.jobs)?;
    let train_subjects = manifest
        .split(Split::Train)?
        .classes
        .iter()
        .flat_map(|c| &c.subsets)
        .flat_map(|s| &s.subjects)
        .map(|j| j.id.clone())
        .collect::<BTreeSet<_>>()
        .len();
    Ok(ReportRow {
        corpus: label.to_string(),
        variant,
        train_subjects,
        accuracies: report.runs.iter().map(|r| r.test_accuracy.unwrap_or(f64::NAN)).collect(),
        mean_accuracy: report.mean_test_accuracy,
        epochs: report.runs.iter().map(|r| r.epochs_run).collect(),
    })
}

fn corpus_at(opts: &RecipeOptions, label: &str, cfg: &CorpusConfig) -> Result<Corpus> {
    let dir = opts.work_dir.join("corpora").join(label);
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(crate::io_err(&dir))?;
    }
    generate_corpus(cfg, &dir, opts.jobs)
}

fn compare(opts: &RecipeOptions, recipe: &str, fakes: &[FakeKind], variants: &[Variant]) -> Result<RecipeReport> {
    let label = fake_label(fakes);
    let corpus = corpus_at(opts, &label, &toy_corpus(fakes, opts.quick, opts.corpus_seed))?;
    let manifest = corpus.manifest()?;
    let rows = variants
        .iter()
        .map(|&v| train_row(&manifest, &label, v, opts, opts.seeds()))
        .collect::<Result<Vec<_>>>()?;
    Ok(RecipeReport {
        recipe: recipe.to_string(),
        rows,
        trace: Vec::new(),
        identity_overlap: None,
    })
}

fn main_recipe(opts: &RecipeOptions) -> Result<RecipeReport> {
    compare(opts, "main", &FakeKind::ALL, &[Variant::C, Variant::S, Variant::CS, Variant::CST])
}

fn ablation_recipe(opts: &RecipeOptions) -> Result<RecipeReport> {
    compare(opts, "ablation", &[FakeKind::TemporalFlicker], &[Variant::CST, Variant::CsNoT])
}

fn compression_recipe(opts: &RecipeOptions) -> Result<RecipeReport> {
    let fakes = FakeKind::ALL;
    let variants = [Variant::S, Variant::CS, Variant::CST];
    let mut rows = Vec::new();
    let mut trace = Vec::new();
    for quality in [Quality::Lossless, opts.quality] {
        let mut cfg = toy_corpus(&fakes, opts.quick, opts.corpus_seed);
        cfg.compression = Some(CompressionSettings {
            quality,
            target_side: opts.target_side,
            strict_encoder: opts.strict_encoder,
        });
        let label = match quality {
            Quality::Lossless => "lossless".to_string(),
            Quality::Crf(c) => format!("crf{c}"),
        };
        let corpus = corpus_at(opts, &label, &cfg)?;
        if quality != Quality::Lossless {
            trace = corpus.sequences.first().map(|s| s.trace.clone()).unwrap_or_default();
        }
        let manifest = corpus.manifest()?;
        for &v in &variants {
            rows.push(train_row(&manifest, &label, v, opts, opts.seeds())?);
        }
    }
    Ok(RecipeReport {
        recipe: "compression".into(),
        rows,
        trace,
        identity_overlap: None,
    })
}

/// Keeps the first `k` training identities (in id order); subsets left
/// without subjects are dropped.
pub fn restrict_train_subjects(manifest: &DatasetManifest, k: usize) -> Result<DatasetManifest> {
    let mut out = manifest.clone();
    let train = out
        .splits
        .get_mut(&Split::Train)
        .ok_or_else(|| BenchError::Contract("manifest has no train split".into()))?;
    let ids: BTreeSet<String> = train
        .classes
        .iter()
        .flat_map(|c| &c.subsets)
        .flat_map(|s| &s.subjects)
        .map(|j| j.id.clone())
        .collect();
    let keep: BTreeSet<String> = ids.into_iter().take(k).collect();
    for c in &mut train.classes {
        for s in &mut c.subsets {
            s.subjects.retain(|j| keep.contains(&j.id));
        }
        c.subsets.retain(|s| !s.subjects.is_empty());
    }
    train.validate()?;
    Ok(out)
}

fn identity_recipe(opts: &RecipeOptions) -> Result<RecipeReport> {
    let fakes = [FakeKind::SpatialBlur, FakeKind::ColorShift];
    let label = fake_label(&fakes);
    let corpus = corpus_at(opts, &label, &toy_corpus(&fakes, opts.quick, opts.corpus_seed))?;
    let overlap: Vec<String> = corpus.subjects(Split::Train).intersection(&corpus.subjects(Split::Test)).cloned().collect();
    let manifest = corpus.manifest()?;
    let total = corpus.subjects(Split::Train).len();
    let mut counts: Vec<usize> = [2, 4, 8].into_iter().filter(|&k| k < total).collect();
    counts.push(total);
    let mut rows = Vec::new();
    for k in counts {
        let restricted = restrict_train_subjects(&manifest, k)?;
        let row_label = format!("{label}-ids{k}");
        rows.push(train_row(&restricted, &row_label, Variant::CS, opts, opts.seeds())?);
    }
    Ok(RecipeReport {
        recipe: "identity_holdout".into(),
        rows,
        trace: Vec::new(),
        identity_overlap: Some(overlap),
    })
}

/// Writes `report.json` and `report.txt` into `dir`.
pub fn save_report(report: &RecipeReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(crate::io_err(dir))?;
    let json = dir.join("report.json");
    fs::write(&json, serde_json::to_string_pretty(report).expect("report serializes")).map_err(crate::io_err(&json))?;
    let txt = dir.join("report.txt");
    fs::write(&txt, report.render()).map_err(crate::io_err(&txt))
}
