use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vfd_media::FrameSequence;
use vfd_mining::{detect_scene_cuts, mask_and_crop, mine_track, CropConfig, LandmarkTrack, MiningConfig, MiningReport, Segment};

use crate::error::{contract, io_err, CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MineConfig {
    pub mining: MiningConfig,
    pub crop_margin: f64,
    pub crop_size: usize,
    /// Histogram distance above which consecutive frames start a new
    /// scene; only used when videos are given.
    pub scene_cut_threshold: f64,
    pub fps: f64,
}

impl Default for MineConfig {
    fn default() -> Self {
        Self {
            mining: MiningConfig::default(),
            crop_margin: CropConfig::default().margin,
            crop_size: CropConfig::default().output_size,
            scene_cut_threshold: vfd_mining::scene::DEFAULT_CUT_THRESHOLD,
            fps: 25.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinedSegment {
    pub track: String,
    pub start: usize,
    pub end: usize,
    pub frames: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crops: Option<PathBuf>,
}

/// Segments of one split across all mined tracks.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MinedManifest {
    pub segments: Vec<MinedSegment>,
}

pub const TRAIN_MANIFEST: &str = "train_segments.json";
pub const TEST_MANIFEST: &str = "test_segments.json";
/// Optional JSON list of known scene cuts next to `<stem>.jsonl`.
pub const CUTS_SUFFIX: &str = ".cuts.json";

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn list_tracks(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    out.sort();
    Ok(out)
}

fn crop_segments(
    video: &FrameSequence,
    track: &LandmarkTrack,
    segments: &[Segment],
    cfg: &MineConfig,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    let crop = CropConfig {
        margin: cfg.crop_margin,
        output_size: cfg.crop_size,
    };
    let mut dirs = Vec::new();
    for s in segments {
        let rel = PathBuf::from(format!("{:06}-{:06}", s.start, s.end));
        let mut frames = Vec::with_capacity(s.len());
        for i in s.frames() {
            let lm = track.frames[i].as_ref().expect("suitable frames are tracked");
            frames.push(mask_and_crop(&video.frames[i], lm, &crop)?);
        }
        FrameSequence::new(frames, video.fps).save_dir(&dir.join(&rel))?;
        dirs.push(rel);
    }
    Ok(dirs)
}

struct Mined {
    report: MiningReport,
    train: Vec<MinedSegment>,
    test: Vec<MinedSegment>,
}

fn mine_one(path: &Path, videos: Option<&Path>, cfg: &MineConfig, out: &Path) -> Result<Mined> {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("track").to_string();
    let track = LandmarkTrack::load(path)?;
    let video = match videos {
        Some(v) => {
            let video = FrameSequence::load_dir(&v.join(&stem), cfg.fps)?;
            if video.len() != track.len() {
                return contract(format!("{stem}: video has {} frames, track {}", video.len(), track.len()));
            }
            Some(video)
        }
        None => None,
    };
    let mut cuts = video
        .as_ref()
        .map(|v| detect_scene_cuts(&v.frames, cfg.scene_cut_threshold))
        .unwrap_or_default();
    let sidecar = path.with_file_name(format!("{stem}{CUTS_SUFFIX}"));
    if sidecar.exists() {
        let text = fs::read_to_string(&sidecar).map_err(io_err(&sidecar))?;
        let listed: Vec<usize> = serde_json::from_str(&text)
            .map_err(|e| CliError::Contract(format!("{}: {e}", sidecar.display())))?;
        cuts.extend(listed);
        cuts.sort_unstable();
        cuts.dedup();
    }
    let report = mine_track(&track, &cuts, &cfg.mining)?;
    write_json(&out.join("reports").join(format!("{stem}.json")), &report)?;
    let entries = |segs: &[Segment], split: &str| -> Result<Vec<MinedSegment>> {
        let crops = match &video {
            Some(v) => {
                let rel = PathBuf::from("crops").join(&stem).join(split);
                crop_segments(v, &track, segs, cfg, &out.join(&rel))?
                    .into_iter()
                    .map(|d| Some(rel.join(d)))
                    .collect()
            }
            None => vec![None; segs.len()],
        };
        Ok(segs
            .iter()
            .zip(crops)
            .map(|(s, crops)| MinedSegment {
                track: stem.clone(),
                start: s.start,
                end: s.end,
                frames: s.len(),
                crops,
            })
            .collect())
    };
    let train = entries(&report.train, "train")?;
    let test = entries(&report.test, "test")?;
    Ok(Mined { report, train, test })
}

pub fn run(tracks: &Path, videos: Option<&Path>, out: &Path, cfg: &MineConfig) -> Result<()> {
    let files = list_tracks(tracks)?;
    if files.is_empty() {
        return contract(format!("no tracks found in {}", tracks.display()));
    }
    let reports = out.join("reports");
    fs::create_dir_all(&reports).map_err(io_err(&reports))?;
    let mut train = MinedManifest::default();
    let mut test = MinedManifest::default();
    let mut failures: Vec<CliError> = Vec::new();
    for path in &files {
        match mine_one(path, videos, cfg, out) {
            Ok(m) => {
                let r = &m.report;
                println!(
                    "{}: {} frames, {} unsuitable, {} segments, {} training frames{}",
                    path.display(),
                    r.frames.len(),
                    r.unsuitable_frames().len(),
                    r.segments.len(),
                    r.train_frames,
                    r.shortfall.map(|s| format!(" (short by {s})")).unwrap_or_default()
                );
                if let Some(s) = r.shortfall {
                    log::warn!("{}: training budget short by {s} frames", path.display());
                }
                train.segments.extend(m.train);
                test.segments.extend(m.test);
            }
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                failures.push(e);
            }
        }
    }
    write_json(&out.join(TRAIN_MANIFEST), &train)?;
    write_json(&out.join(TEST_MANIFEST), &test)?;
    match failures.len() {
        0 => Ok(()),
        n => {
            let any_io = failures.iter().any(|e| matches!(e, CliError::Io(_)));
            let msg = format!("{n} of {} tracks failed", files.len());
            Err(if any_io { CliError::Io(msg) } else { CliError::Contract(msg) })
        }
    }
}
