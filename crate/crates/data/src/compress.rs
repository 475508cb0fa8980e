//! Lossy re-encoding through a pluggable encoder client.
//!
//! [`StubEncoder`] quantizes 8×8 DCT blocks per channel with a step that
//! doubles every 6 CRF points, mimicking an H.264 rate factor without any
//! external tool. [`ExternalEncoder`] round-trips the frames through an
//! ffmpeg-compatible binary with libx264.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};
use vfd_media::{FrameSequence, Image};

use crate::{io_err, DataError, Result};

/// Environment variable naming the external encoder binary.
pub const ENCODER_ENV: &str = "VFD_ENCODER";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quality {
    Lossless,
    Crf(u32),
}

impl std::str::FromStr for Quality {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("lossless") || s.eq_ignore_ascii_case("raw") {
            return Ok(Quality::Lossless);
        }
        let crf: u32 = s.parse().map_err(|_| DataError::Contract(format!("quality {s:?} is neither `lossless` nor a CRF")))?;
        if crf > 51 {
            return Err(DataError::Contract(format!("CRF {crf} outside 0..=51")));
        }
        Ok(Quality::Crf(crf))
    }
}

pub trait EncoderClient {
    fn name(&self) -> &str;

    /// Encodes and decodes `video`; output frames have the input's size.
    fn encode(&self, video: &FrameSequence, quality: Quality) -> Result<FrameSequence>;
}

const BLOCK: usize = 8;

#[derive(Clone, Copy, Debug, Default)]
pub struct StubEncoder;

impl StubEncoder {
    /// Quantization step for the DC coefficient at a given CRF.
    pub fn step(crf: u32) -> f64 {
        2f64.powf((crf as f64 - 4.0) / 6.0) / 255.0
    }

    fn basis() -> [[f64; BLOCK]; BLOCK] {
        let mut b = [[0.0; BLOCK]; BLOCK];
        for (k, row) in b.iter_mut().enumerate() {
            let a = if k == 0 { (1.0 / BLOCK as f64).sqrt() } else { (2.0 / BLOCK as f64).sqrt() };
            for (n, v) in row.iter_mut().enumerate() {
                *v = a * (std::f64::consts::PI * (2 * n + 1) as f64 * k as f64 / (2 * BLOCK) as f64).cos();
            }
        }
        b
    }

    pub fn encode_frame(img: &Image, crf: u32) -> Image {
        let basis = Self::basis();
        let step = Self::step(crf);
        let (w, h) = (img.width(), img.height());
        let mut out = img.clone();
        for c in 0..3 {
            for by in (0..h).step_by(BLOCK) {
                for bx in (0..w).step_by(BLOCK) {
                    let mut block = [[0.0f64; BLOCK]; BLOCK];
                    for (y, row) in block.iter_mut().enumerate() {
                        for (x, v) in row.iter_mut().enumerate() {
                            // replicate edges of partial blocks
                            *v = img.get(c, (bx + x).min(w - 1), (by + y).min(h - 1)) as f64;
                        }
                    }
                    let mut coef = [[0.0f64; BLOCK]; BLOCK];
                    for u in 0..BLOCK {
                        for v in 0..BLOCK {
                            let mut s = 0.0;
                            for y in 0..BLOCK {
                                for x in 0..BLOCK {
                                    s += basis[u][y] * basis[v][x] * block[y][x];
                                }
                            }
                            // coarser steps for higher frequencies
                            let q = step * (1.0 + (u + v) as f64 / 4.0);
                            coef[u][v] = (s / q).round() * q;
                        }
                    }
                    for y in 0..BLOCK.min(h - by) {
                        for x in 0..BLOCK.min(w - bx) {
                            let mut s = 0.0;
                            for u in 0..BLOCK {
                                for v in 0..BLOCK {
                                    s += basis[u][y] * basis[v][x] * coef[u][v];
                                }
                            }
                            out.set(c, bx + x, by + y, s.clamp(0.0, 1.0) as f32);
                        }
                    }
                }
            }
        }
        out
    }
}

impl EncoderClient for StubEncoder {
    fn name(&self) -> &str {
        "stub-dct"
    }

    fn encode(&self, video: &FrameSequence, quality: Quality) -> Result<FrameSequence> {
        match quality {
            Quality::Lossless => Ok(video.clone()),
            Quality::Crf(crf) => Ok(FrameSequence::new(video.frames.iter().map(|f| Self::encode_frame(f, crf)).collect(), video.fps)),
        }
    }
}

/// H.264 round trip through an external ffmpeg-compatible binary.
#[derive(Clone, Debug)]
pub struct ExternalEncoder {
    pub program: PathBuf,
}

impl ExternalEncoder {
    fn run(&self, args: &[&str]) -> Result<()> {
        let out = Command::new(&self.program)
            .args(args)
            .output()
            .map_err(|e| DataError::Encoder(format!("{}: {e}", self.program.display())))?;
        if !out.status.success() {
            return Err(DataError::Encoder(String::from_utf8_lossy(&out.stderr).lines().last().unwrap_or("").to_string()));
        }
        Ok(())
    }
}

fn path_str(p: &Path) -> Result<&str> {
    p.to_str().ok_or_else(|| DataError::Encoder(format!("non-UTF-8 path {}", p.display())))
}

impl EncoderClient for ExternalEncoder {
    fn name(&self) -> &str {
        "external-h264"
    }

    fn encode(&self, video: &FrameSequence, quality: Quality) -> Result<FrameSequence> {
        let Quality::Crf(crf) = quality else {
            return Ok(video.clone());
        };
        let tmp = tempfile::tempdir().map_err(io_err(Path::new("temporary directory")))?;
        let src = tmp.path().join("in");
        let dst = tmp.path().join("out");
        std::fs::create_dir_all(&dst).map_err(io_err(&dst))?;
        video.save_dir(&src)?;
        let movie = tmp.path().join("clip.mp4");
        let fps = format!("{}", video.fps);
        let crf = crf.to_string();
        let pattern = src.join("%06d.png");
        self.run(&[
            "-loglevel", "error", "-y", "-framerate", &fps, "-i", path_str(&pattern)?, "-c:v", "libx264", "-crf", &crf, "-pix_fmt", "yuv420p",
            "-vf", "pad=ceil(iw/2)*2:ceil(ih/2)*2", path_str(&movie)?,
        ])?;
        let out_pattern = dst.join("%06d.png");
        self.run(&["-loglevel", "error", "-y", "-i", path_str(&movie)?, "-start_number", "0", path_str(&out_pattern)?])?;
        let decoded = FrameSequence::load_dir(&dst, video.fps)?;
        if decoded.len() != video.len() {
            return Err(DataError::Encoder(format!("decoded {} frames, expected {}", decoded.len(), video.len())));
        }
        let (w, h) = (video.frames[0].width(), video.frames[0].height());
        let frames = decoded
            .frames
            .into_iter()
            .map(|f| if (f.width(), f.height()) == (w, h) { f } else { Image::from_fn(w, h, |c, x, y| f.get(c, x, y)) })
            .collect();
        Ok(FrameSequence::new(frames, video.fps))
    }
}

/// The encoder named by `VFD_ENCODER`, or the stub when it is unset or not
/// runnable. With `strict`, a missing encoder is an error instead.
pub fn encoder_from_env(strict: bool) -> Result<Box<dyn EncoderClient>> {
    match std::env::var_os(ENCODER_ENV) {
        Some(p) if Command::new(&p).arg("-version").output().is_ok_and(|o| o.status.success()) => Ok(Box::new(ExternalEncoder { program: p.into() })),
        other => {
            let why = match other {
                Some(p) => format!("{} is not runnable", PathBuf::from(p).display()),
                None => format!("{ENCODER_ENV} is not set"),
            };
            if strict {
                Err(DataError::Encoder(format!("no external encoder: {why}")))
            } else {
                log::warn!("no external encoder ({why}); using the DCT stub");
                Ok(Box::new(StubEncoder))
            }
        }
    }
}
