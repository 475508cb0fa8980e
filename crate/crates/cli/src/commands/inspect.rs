use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vfd_media::{FrameSequence, Image};
use vfd_model::signal::{normalize_color, spatial_highpass, temporal_noise, FrameWindow, TemporalNoiseConfig};
use vfd_model::{Detector, DetectorSpec, InputKind, Variant};
use vfd_tensor::Tensor;

use crate::error::{contract, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InspectConfig {
    pub variant: Variant,
    pub temporal: TemporalNoiseConfig,
    /// Threshold `t`; defaults to the checkpoint's learned value, else the
    /// initial value of `temporal`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// Temporal noise is written as `clamp(gain * T)`.
    pub temporal_gain: f64,
}

impl Default for InspectConfig {
    fn default() -> Self {
        Self {
            variant: Variant::CST,
            temporal: TemporalNoiseConfig::default(),
            threshold: None,
            temporal_gain: 4.0,
        }
    }
}

fn to_image(t: &Tensor<f64>) -> Result<Image> {
    Ok(Image::from_tensor(&t.map(|v| v.clamp(0.0, 1.0)))?)
}

/// Writes the preprocessed planes the variant consumes for frame `index`
/// of the clip in `frames`; returns the written paths.
pub fn run(frames: &Path, index: Option<usize>, checkpoint: Option<&Path>, out: &Path, cfg: &mut InspectConfig) -> Result<Vec<PathBuf>> {
    if let Some(stem) = checkpoint {
        let (det, _) = Detector::<f32>::load(stem)?;
        cfg.temporal = *det.temporal_config();
        if cfg.threshold.is_none() {
            cfg.threshold = det.threshold();
        }
    }
    let clip = FrameSequence::load_dir(frames, 25.0)?;
    if clip.is_empty() {
        return contract(format!("no frames in {}", frames.display()));
    }
    let i = index.unwrap_or(clip.len() / 2);
    if i >= clip.len() {
        return contract(format!("frame {i} outside a clip of {} frames", clip.len()));
    }
    let color: Tensor<f64> = normalize_color(&clip.frames[i]);
    let kinds = DetectorSpec::standard(cfg.variant).inputs();
    let mut written = Vec::new();
    let mut save = |name: &str, img: Image| -> Result<()> {
        let path = out.join(name);
        img.save_png(&path)?;
        written.push(path);
        Ok(())
    };
    std::fs::create_dir_all(out).map_err(crate::error::io_err(out))?;
    if kinds.contains(&InputKind::Color) {
        save("color.png", to_image(&color)?)?;
    }
    if kinds.contains(&InputKind::SpatialNoise) {
        save("spatial_noise.png", to_image(&spatial_highpass(&color))?)?;
    }
    if kinds.contains(&InputKind::TemporalNoise) {
        let tensors: Vec<Tensor<f64>> = clip.frames.iter().map(normalize_color).collect();
        let window = FrameWindow::from_clip(&tensors, i)?;
        let t = cfg.threshold.unwrap_or(cfg.temporal.threshold_init);
        let noise = temporal_noise(&window, t, &cfg.temporal)?;
        let max = noise.data().iter().cloned().fold(0.0, f64::max);
        println!("temporal noise: t = {t}, max {max:.3e}");
        save("temporal_noise.png", to_image(&noise.map(|v| v * cfg.temporal_gain))?)?;
    }
    for p in &written {
        println!("wrote {}", p.display());
    }
    Ok(written)
}
