//! `vfd`: landmark mining, preprocessing, training, evaluation, synthetic
//! benchmarks and plane inspection.
//!
//! Each subcommand reads an optional TOML file (`--config`), applies
//! `--set dotted.key=value` overrides and then its own flags, prints the
//! effective configuration and writes it as `config.toml` to its output
//! directory. Exit codes: 0 success, 1 contract violation, 2 I/O failure.
//!
//! `VFD_ENCODER` names an external H.264 encoder command; without it the
//! built-in blockwise-DCT stub is used unless `--strict-encoder` is set.

mod commands;
mod config;
mod error;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use toml::{Table, Value};
use vfd_bench::{CorpusConfig, FakeKind};
use vfd_train::RunConfig;

use crate::config::{echo, parse_override, resolve};
use crate::error::Result;

#[derive(Parser, Debug)]
#[command(name = "vfd", version, about = "Video face-manipulation detection toolkit")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// TOML configuration file for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set training.batch_size=16`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Seed for subcommands that draw random numbers.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// More log output; repeat for debug.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Errors only.
    #[arg(short, long, global = true)]
    quiet: bool,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Select training and test segments from landmark tracks.
    Mine {
        /// Directory of `*.jsonl` landmark tracks.
        #[arg(long)]
        tracks: PathBuf,
        /// Directory holding one frame directory per track stem; enables
        /// scene-cut detection and face crops.
        #[arg(long)]
        videos: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        budget_lo: Option<usize>,
        #[arg(long)]
        budget_hi: Option<usize>,
    },
    /// Normalize resolution, compress and extract detector frames.
    Preprocess {
        /// Directory of PNG frames.
        #[arg(long)]
        video: PathBuf,
        /// Landmark track of the video.
        #[arg(long)]
        track: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Constant rate factor; lossless when absent.
        #[arg(long)]
        crf: Option<u32>,
        /// Mean face side after resolution normalization.
        #[arg(long)]
        target_side: Option<f64>,
        /// Fail instead of falling back to the stub encoder.
        #[arg(long)]
        strict_encoder: bool,
    },
    /// Train detectors from a run configuration.
    Train {
        #[arg(long)]
        out: PathBuf,
    },
    /// Weighted accuracy of a checkpoint on a manifest split.
    Eval {
        /// Checkpoint stem (`<stem>.bin` and `<stem>.json`).
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// train, val or test (default).
        #[arg(long)]
        split: Option<String>,
        #[arg(long)]
        batch: Option<usize>,
    },
    /// Run a benchmark recipe, or generate a synthetic corpus.
    Bench {
        /// main, ablation, compression or identity_holdout.
        #[arg(long, required_unless_present = "generate")]
        recipe: Option<String>,
        /// Smaller corpora, narrower models, fewer epochs.
        #[arg(long)]
        quick: bool,
        /// Training runs per row.
        #[arg(long)]
        seeds: Option<usize>,
        /// Working directory for corpora and reports.
        #[arg(long)]
        work: Option<PathBuf>,
        /// Write a synthetic corpus to this directory instead.
        #[arg(long, conflicts_with = "recipe")]
        generate: Option<PathBuf>,
        /// Comma-separated fake kinds for `--generate`.
        #[arg(long, value_delimiter = ',', requires = "generate")]
        fakes: Vec<FakeKind>,
        /// Constant rate factor of the compression recipe.
        #[arg(long)]
        crf: Option<u32>,
        /// Mean face side after resolution normalization.
        #[arg(long)]
        target_side: Option<f64>,
        /// Fail instead of falling back to the stub encoder.
        #[arg(long)]
        strict_encoder: bool,
    },
    /// Write the color, spatial-noise and temporal-noise planes of a frame.
    Inspect {
        /// Directory of PNG frames.
        #[arg(long)]
        frames: PathBuf,
        /// Frame index; defaults to the middle frame.
        #[arg(long)]
        index: Option<usize>,
        /// Take the temporal configuration and threshold from a checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// C, S, CS, CST or CS_noT.
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Layered overrides: `--set` first, then subcommand flags.
struct Overrides(Vec<(String, Value)>);

impl Overrides {
    fn new(raw: &[String]) -> Result<Self> {
        raw.iter().map(|s| parse_override(s)).collect::<Result<_>>().map(Overrides)
    }

    fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.0.push((key.to_string(), value.into()));
    }

    fn maybe<V: Into<Value>>(&mut self, key: &str, value: Option<V>) {
        if let Some(v) = value {
            self.set(key, v);
        }
    }

    fn flag(&mut self, key: &str, on: bool) {
        if on {
            self.set(key, true);
        }
    }

    fn crf(&mut self, crf: Option<u32>) {
        if let Some(c) = crf {
            let mut t = Table::new();
            t.insert("crf".into(), Value::Integer(c.into()));
            self.set("quality", t);
        }
    }

    fn resolve<C: serde::de::DeserializeOwned>(&self, file: Option<&Path>) -> Result<C> {
        resolve(file, &self.0)
    }
}

fn count(n: usize) -> Value {
    Value::Integer(n as i64)
}

fn seed(s: u64) -> Value {
    Value::Integer(s as i64)
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let file = g.config.as_deref();
    let mut ov = Overrides::new(&g.overrides)?;
    let jobs = g
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1);
    match cli.command {
        Command::Mine {
            tracks,
            videos,
            out,
            budget_lo,
            budget_hi,
        } => {
            ov.maybe("mining.budget_lo", budget_lo.map(count));
            ov.maybe("mining.budget_hi", budget_hi.map(count));
            let cfg: commands::mine::MineConfig = ov.resolve(file)?;
            echo(&cfg, Some(&out))?;
            commands::mine::run(&tracks, videos.as_deref(), &out, &cfg)
        }
        Command::Preprocess {
            video,
            track,
            out,
            crf,
            target_side,
            strict_encoder,
        } => {
            ov.crf(crf);
            ov.maybe("target_side", target_side);
            ov.flag("strict_encoder", strict_encoder);
            let cfg: commands::preprocess::PreprocessConfig = ov.resolve(file)?;
            echo(&cfg, Some(&out))?;
            commands::preprocess::run(&video, &track, &out, &cfg)
        }
        Command::Train { out } => {
            ov.maybe("training.seed", g.seed.map(seed));
            let cfg: RunConfig = ov.resolve(file)?;
            echo(&cfg, Some(&out))?;
            commands::train::train(&cfg, &out, jobs)
        }
        Command::Eval {
            checkpoint,
            manifest,
            split,
            batch,
        } => {
            ov.maybe("split", split);
            ov.maybe("batch_size", batch.map(count));
            let cfg: commands::train::EvalConfig = ov.resolve(file)?;
            echo(&cfg, None)?;
            let acc = commands::train::eval(&checkpoint, &manifest, cfg.split, cfg.batch_size)?;
            println!("weighted accuracy ({}): {acc:.4}", cfg.split);
            Ok(())
        }
        Command::Bench {
            recipe,
            quick,
            seeds,
            work,
            generate,
            fakes,
            crf,
            target_side,
            strict_encoder,
        } => {
            if let Some(dir) = generate {
                if !fakes.is_empty() {
                    let list = fakes
                        .iter()
                        .map(|k| {
                            let mut t = Table::new();
                            t.insert("kind".into(), Value::String(k.name().into()));
                            t.insert("strength".into(), Value::Float(k.default_strength()));
                            Value::Table(t)
                        })
                        .collect::<Vec<_>>();
                    ov.set("fakes", list);
                }
                ov.maybe("seed", g.seed.map(seed));
                let cfg: CorpusConfig = ov.resolve(file)?;
                echo(&cfg, Some(&dir))?;
                return commands::bench::generate(&dir, &cfg, jobs);
            }
            let name = recipe.expect("clap requires --recipe without --generate");
            ov.flag("quick", quick);
            ov.maybe("seeds", seeds.map(count));
            ov.maybe("work_dir", work.map(|p| p.display().to_string()));
            ov.crf(crf);
            ov.maybe("target_side", target_side);
            ov.flag("strict_encoder", strict_encoder);
            ov.maybe("corpus_seed", g.seed.map(seed));
            let cfg: commands::bench::BenchConfig = ov.resolve(file)?;
            echo(&cfg, Some(&cfg.work_dir.join(&name)))?;
            commands::bench::recipe(&name, &cfg, jobs)
        }
        Command::Inspect {
            frames,
            index,
            checkpoint,
            variant,
            out,
        } => {
            ov.maybe("variant", variant);
            let mut cfg: commands::inspect::InspectConfig = ov.resolve(file)?;
            commands::inspect::run(&frames, index, checkpoint.as_deref(), &out, &mut cfg)?;
            echo(&cfg, Some(&out))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.global.quiet, cli.global.verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
