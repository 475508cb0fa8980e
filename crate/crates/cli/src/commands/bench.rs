use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vfd_bench::{generate_corpus, run_recipe, save_report, CorpusConfig, RecipeOptions};
use vfd_data::Quality;

use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub quick: bool,
    /// Training runs per row; 0 picks the recipe default.
    pub seeds: usize,
    pub corpus_seed: u64,
    pub work_dir: PathBuf,
    /// Quality of the compressed corpus in the compression recipe.
    pub quality: Quality,
    pub target_side: f64,
    pub strict_encoder: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let o = RecipeOptions::new("bench-work");
        Self {
            quick: o.quick,
            seeds: 0,
            corpus_seed: o.corpus_seed,
            work_dir: o.work_dir,
            quality: o.quality,
            target_side: o.target_side,
            strict_encoder: o.strict_encoder,
        }
    }
}

impl BenchConfig {
    pub fn options(&self, jobs: usize) -> RecipeOptions {
        RecipeOptions {
            quick: self.quick,
            seeds: (self.seeds > 0).then_some(self.seeds),
            jobs,
            work_dir: self.work_dir.clone(),
            corpus_seed: self.corpus_seed,
            quality: self.quality,
            target_side: self.target_side,
            strict_encoder: self.strict_encoder,
        }
    }
}

pub fn recipe(name: &str, cfg: &BenchConfig, jobs: usize) -> Result<()> {
    let opts = cfg.options(jobs);
    let report = run_recipe(name, &opts)?;
    let dir = opts.work_dir.join(name);
    save_report(&report, &dir)?;
    print!("{}", report.render());
    println!("report written to {}", dir.display());
    Ok(())
}

pub fn generate(dir: &Path, cfg: &CorpusConfig, jobs: usize) -> Result<()> {
    let corpus = generate_corpus(cfg, dir, jobs)?;
    println!(
        "{} sequences written to {}; manifest {}",
        corpus.sequences.len(),
        dir.display(),
        corpus.manifest_path().display()
    );
    Ok(())
}
