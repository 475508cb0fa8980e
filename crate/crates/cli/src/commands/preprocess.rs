use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use vfd_data::{encoder_from_env, CompressionPipeline, ExtractConfig, Quality};
use vfd_media::FrameSequence;
use vfd_mining::{crop_box, LandmarkTrack};

use crate::error::{contract, io_err, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    /// Time-average face box side after resolution normalization.
    pub target_side: f64,
    pub quality: Quality,
    pub strict_encoder: bool,
    /// Face box side relative to the landmark bounding box.
    pub box_margin: f64,
    /// Frame rate of the input frames.
    pub fps: f64,
    pub extract: ExtractConfig,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            target_side: 258.0,
            quality: Quality::Lossless,
            strict_encoder: false,
            box_margin: 1.3,
            fps: 25.0,
            extract: ExtractConfig::default(),
        }
    }
}

/// Resizes, compresses and crops one video; writes `frames/`, the crop
/// track and the stage trace to `out`.
pub fn run(video_dir: &Path, track_path: &Path, out: &Path, cfg: &PreprocessConfig) -> Result<()> {
    let video = FrameSequence::load_dir(video_dir, cfg.fps)?;
    if video.is_empty() {
        return contract(format!("no frames in {}", video_dir.display()));
    }
    let track = LandmarkTrack::load(track_path)?;
    if track.len() != video.len() {
        return contract(format!("video has {} frames, track {}", video.len(), track.len()));
    }
    let boxes: Vec<_> = track.frames.iter().map(|f| f.as_ref().map(|lm| crop_box(lm, cfg.box_margin))).collect();
    let encoder = encoder_from_env(cfg.strict_encoder)?;
    let pipeline = CompressionPipeline {
        target_side: cfg.target_side,
        quality: cfg.quality,
        extract: cfg.extract.clone(),
    };
    let output = pipeline.run(&video, &boxes, encoder.as_ref())?;
    output.extracted.frames.save_dir(&out.join("frames"))?;
    let write = |name: &str, text: String| {
        let path = out.join(name);
        fs::write(&path, text).map_err(io_err(&path))
    };
    write("crop_track.json", serde_json::to_string_pretty(&output.extracted.track).expect("crop track serializes"))?;
    write("trace.json", serde_json::to_string_pretty(&output.trace).expect("trace serializes"))?;
    println!("encoder: {}", encoder.name());
    for s in &output.trace {
        println!("{:<24} {:?} -> {:?}  {}", s.name, s.input_size, s.output_size, s.detail);
    }
    println!("{} frames written to {}", output.extracted.frames.len(), out.join("frames").display());
    Ok(())
}
