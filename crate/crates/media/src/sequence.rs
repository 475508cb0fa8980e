use std::fs;
use std::path::Path;

use crate::{Image, MediaError, Result};

/// Ordered video frames with their frame rate.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    pub frames: Vec<Image>,
    pub fps: f64,
}

impl FrameSequence {
    pub fn new(frames: Vec<Image>, fps: f64) -> Self {
        Self { frames, fps }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Resample to `target_fps` by linear interpolation between the two
    /// neighbouring source frames.
    pub fn resample(&self, target_fps: f64) -> FrameSequence {
        let n = self.frames.len();
        if n == 0 || (self.fps - target_fps).abs() < 1e-9 {
            return FrameSequence::new(self.frames.clone(), target_fps);
        }
        let count = resampled_len(n, self.fps, target_fps);
        let frames = (0..count)
            .map(|k| {
                let (i0, i1, w) = source_position(k, self.fps, target_fps, n);
                if w == 0.0 {
                    self.frames[i0].clone()
                } else {
                    let (a, b) = (&self.frames[i0], &self.frames[i1]);
                    let data = a.data().iter().zip(b.data()).map(|(x, y)| x * (1.0 - w) + y * w).collect();
                    Image::from_planar(a.width(), a.height(), data).expect("same-sized frames")
                }
            })
            .collect();
        FrameSequence::new(frames, target_fps)
    }

    /// Frames as `000000.png, 000001.png, ...` in `dir`.
    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|source| MediaError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        for (i, f) in self.frames.iter().enumerate() {
            f.save_png(&dir.join(frame_name(i)))?;
        }
        Ok(())
    }

    /// Load every `*.png` in `dir`, sorted by file name.
    pub fn load_dir(dir: &Path, fps: f64) -> Result<FrameSequence> {
        let mut paths: Vec<_> = fs::read_dir(dir)
            .map_err(|source| MediaError::Io {
                path: dir.display().to_string(),
                source,
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "png"))
            .collect();
        paths.sort();
        let frames = paths.iter().map(|p| Image::load_png(p)).collect::<Result<Vec<_>>>()?;
        Ok(FrameSequence::new(frames, fps))
    }
}

pub fn frame_name(i: usize) -> String {
    format!("{i:06}.png")
}

/// Number of frames after resampling `n` frames from `from` to `to` fps.
pub fn resampled_len(n: usize, from: f64, to: f64) -> usize {
    if n == 0 {
        return 0;
    }
    (((n - 1) as f64 * to / from) + 1e-9).floor() as usize + 1
}

/// Source frames and blend weight for output frame `k`.
pub fn source_position(k: usize, from: f64, to: f64, n: usize) -> (usize, usize, f32) {
    let p = k as f64 * from / to;
    let i0 = (p + 1e-9).floor() as usize;
    let i0 = i0.min(n - 1);
    let w = (p - i0 as f64).max(0.0);
    let w = if w < 1e-9 { 0.0 } else { w as f32 };
    (i0, (i0 + 1).min(n - 1), w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(n: usize, fps: f64) -> FrameSequence {
        FrameSequence::new((0..n).map(|i| Image::filled(2, 2, [i as f32 / 100.0; 3])).collect(), fps)
    }

    #[test]
    fn halving_frame_rate() {
        let out = seq(20, 50.0).resample(25.0);
        assert_eq!(out.len(), 10);
        assert_eq!(out.frames[3].get(0, 0, 0), 6.0 / 100.0);
    }

    #[test]
    fn upsampling_interpolates() {
        let out = seq(3, 12.5).resample(25.0);
        assert_eq!(out.len(), 5);
        assert!((out.frames[1].get(0, 0, 0) - 0.005).abs() < 1e-7);
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = FrameSequence::new(vec![Image::from_rgb8(2, 1, &[0, 10, 20, 255, 128, 3]).unwrap()], 25.0);
        s.save_dir(dir.path()).unwrap();
        let back = FrameSequence::load_dir(dir.path(), 25.0).unwrap();
        assert_eq!(back, s);
    }
}
