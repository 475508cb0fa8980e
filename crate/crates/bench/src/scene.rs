//! Synthetic talking-head clips: a textured elliptical face proxy over a
//! slowly moving background, with the matching landmark track.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use vfd_media::Image;
use vfd_mining::{Landmark, LandmarkFrame, LandmarkTrack};

use crate::template::{template, EYE_CENTERS, EYE_RADII, FACE_ASPECT, MOUTH_CENTER, MOUTH_RADII};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSceneConfig {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub fps: f64,
    /// Standard deviation of the per-pixel sensor noise.
    pub noise_sigma: f64,
    /// Range of the face half-width in pixels.
    pub face_scale: (f64, f64),
    /// Amplitude of the face's sinusoidal drift in pixels.
    pub motion: f64,
    /// Amplitude of the face texture.
    pub texture: f64,
    /// Texture cell size in pixels.
    pub texture_cell: f64,
}

impl Default for SyntheticSceneConfig {
    fn default() -> Self {
        Self {
            width: 128,
            height: 96,
            frames: 40,
            fps: 25.0,
            noise_sigma: 0.01,
            face_scale: (17.0, 20.0),
            motion: 4.0,
            texture: 0.05,
            texture_cell: 1.5,
        }
    }
}

/// Background styles; each forms its own subset in the manifest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backdrop {
    Studio,
    Street,
}

impl Backdrop {
    pub const ALL: [Backdrop; 2] = [Backdrop::Studio, Backdrop::Street];

    pub fn name(self) -> &'static str {
        match self {
            Backdrop::Studio => "studio",
            Backdrop::Street => "street",
        }
    }
}

/// Identity: skin albedo, feature tints, texture and face size.
#[derive(Clone, Debug)]
pub struct Subject {
    pub albedo: [f64; 3],
    pub eye_tint: f64,
    pub mouth_tint: [f64; 3],
    pub half_width: f64,
    texture: Vec<f64>,
    grid: (usize, usize),
    cell: f64,
}

impl Subject {
    pub fn random(cfg: &SyntheticSceneConfig, rng: &mut impl Rng) -> Self {
        let half_width = rng.gen_range(cfg.face_scale.0..=cfg.face_scale.1);
        let cell = cfg.texture_cell / half_width;
        let grid = ((2.4 / cell).ceil() as usize + 2, (2.0 * FACE_ASPECT / cell).ceil() as usize + 2);
        Self {
            albedo: [rng.gen_range(0.3..0.7), rng.gen_range(0.3..0.7), rng.gen_range(0.3..0.7)],
            eye_tint: rng.gen_range(0.3..0.6),
            mouth_tint: [rng.gen_range(0.6..0.9), rng.gen_range(0.3..0.6), rng.gen_range(0.3..0.6)],
            half_width,
            texture: (0..grid.0 * grid.1).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            grid,
            cell,
        }
    }

    /// Bilinear value noise in face coordinates.
    fn texture_at(&self, u: f64, v: f64) -> f64 {
        let gx = ((u + 1.2) / self.cell).clamp(0.0, (self.grid.0 - 2) as f64);
        let gy = ((v + FACE_ASPECT) / self.cell).clamp(0.0, (self.grid.1 - 2) as f64);
        let (x0, y0) = (gx.floor() as usize, gy.floor() as usize);
        let (fx, fy) = (gx - x0 as f64, gy - y0 as f64);
        let at = |x: usize, y: usize| self.texture[y * self.grid.0 + x];
        let top = at(x0, y0) * (1.0 - fx) + at(x0 + 1, y0) * fx;
        let bottom = at(x0, y0 + 1) * (1.0 - fx) + at(x0 + 1, y0 + 1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

/// Smooth motion of one clip.
#[derive(Clone, Debug)]
struct Motion {
    phase: [f64; 6],
    freq: [f64; 6],
    background: [[f64; 3]; 3],
    stripe_angle: f64,
    drift: f64,
}

impl Motion {
    fn random(rng: &mut impl Rng) -> Self {
        let mut phase = [0.0; 6];
        let mut freq = [0.0; 6];
        for k in 0..6 {
            phase[k] = rng.gen_range(0.0..std::f64::consts::TAU);
            freq[k] = rng.gen_range(0.15..0.4);
        }
        let mut background = [[0.0; 3]; 3];
        for c in 0..3 {
            background[0][c] = rng.gen_range(0.3..0.7);
            background[1][c] = rng.gen_range(-0.15..0.15);
            background[2][c] = rng.gen_range(-0.15..0.15);
        }
        Self {
            phase,
            freq,
            background,
            stripe_angle: rng.gen_range(0.0..std::f64::consts::PI),
            drift: rng.gen_range(-0.3..0.3),
        }
    }

    fn wave(&self, k: usize, t: f64) -> f64 {
        (std::f64::consts::TAU * self.freq[k] * t + self.phase[k]).sin()
    }
}

/// Face pose at one frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub cx: f64,
    pub cy: f64,
    pub scale: f64,
    pub angle: f64,
    pub mouth_open: f64,
}

impl Pose {
    /// Image position of a face-coordinate point.
    pub fn to_image(&self, (u, v): (f64, f64)) -> (f64, f64) {
        let (s, c) = self.angle.sin_cos();
        (self.cx + self.scale * (c * u - s * v), self.cy + self.scale * (s * u + c * v))
    }

    /// Face coordinates of an image position.
    pub fn to_face(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.angle.sin_cos();
        let (dx, dy) = ((x - self.cx) / self.scale, (y - self.cy) / self.scale);
        (c * dx + s * dy, -s * dx + c * dy)
    }
}

/// Clean (noise-free) frames, per-frame face masks and poses of one clip.
#[derive(Clone, Debug)]
pub struct Clip {
    pub frames: Vec<Image>,
    /// Soft face-region weight per pixel, `[0,1]`, one per frame.
    pub masks: Vec<Vec<f32>>,
    pub poses: Vec<Pose>,
}

fn inside(u: f64, v: f64, c: (f64, f64), r: (f64, f64), px: f64) -> f64 {
    let d = (((u - c.0) / r.0).powi(2) + ((v - c.1) / r.1).powi(2)).sqrt();
    // about one pixel of anti-aliasing
    ((1.0 - d) * r.0.min(r.1) * px + 0.5).clamp(0.0, 1.0)
}

/// Renders a clip of `subject` against `backdrop`; `rng` drives the
/// motion and background.
pub fn render_clip(cfg: &SyntheticSceneConfig, subject: &Subject, backdrop: Backdrop, rng: &mut impl Rng) -> Clip {
    let m = Motion::random(rng);
    let (w, h) = (cfg.width, cfg.height);
    let mut clip = Clip {
        frames: Vec::with_capacity(cfg.frames),
        masks: Vec::with_capacity(cfg.frames),
        poses: Vec::with_capacity(cfg.frames),
    };
    for k in 0..cfg.frames {
        let t = k as f64 / cfg.fps;
        let pose = Pose {
            cx: w as f64 / 2.0 + cfg.motion * m.wave(0, t),
            cy: h as f64 / 2.0 + 0.5 * cfg.motion * m.wave(1, t),
            scale: subject.half_width * (1.0 + 0.03 * m.wave(2, t)),
            angle: 0.05 * m.wave(3, t),
            mouth_open: 0.8 + 0.4 * m.wave(4, t),
        };
        let mut mask = vec![0f32; w * h];
        let mut face = vec![[0f64; 3]; w * h];
        for y in 0..h {
            for x in 0..w {
                let (u, v) = pose.to_face(x as f64 + 0.5, y as f64 + 0.5);
                let a = inside(u, v, (0.0, 0.0), (1.0, FACE_ASPECT), pose.scale);
                if a <= 0.0 {
                    continue;
                }
                mask[y * w + x] = a as f32;
                let shade = 1.0 - 0.12 * v + 0.05 * u;
                let tex = cfg.texture * subject.texture_at(u, v);
                let eye = EYE_CENTERS
                    .iter()
                    .map(|&c| inside(u, v, c, EYE_RADII, pose.scale))
                    .fold(0.0, f64::max);
                let mouth = inside(u, v, MOUTH_CENTER, (MOUTH_RADII.0, MOUTH_RADII.1 * pose.mouth_open), pose.scale);
                for c in 0..3 {
                    let skin = subject.albedo[c] * shade;
                    let eye_c = subject.albedo[c] * subject.eye_tint;
                    let mouth_c = subject.albedo[c] * subject.mouth_tint[c];
                    let base = skin * (1.0 - eye - mouth) + eye_c * eye + mouth_c * mouth;
                    face[y * w + x][c] = base + tex;
                }
            }
        }
        let shift = m.drift * k as f64;
        let (sa, ca) = m.stripe_angle.sin_cos();
        let frame = Image::from_fn(w, h, |c, x, y| {
            let (xf, yf) = ((x as f64 + shift) / w as f64, y as f64 / h as f64);
            let mut bg = m.background[0][c] + m.background[1][c] * (xf - 0.5) + m.background[2][c] * (yf - 0.5);
            if backdrop == Backdrop::Street {
                bg += 0.06 * (std::f64::consts::TAU * ((x as f64 + shift) * ca + y as f64 * sa) / 14.0).sin();
            }
            let a = mask[y * w + x] as f64;
            (a * face[y * w + x][c] + (1.0 - a) * bg) as f32
        });
        clip.frames.push(frame);
        clip.masks.push(mask);
        clip.poses.push(pose);
    }
    clip
}

/// Landmarks of every pose, confidence `0.9 ± 0.02`.
pub fn landmark_track(clip: &Clip, cfg: &SyntheticSceneConfig, rng: &mut impl Rng) -> LandmarkTrack {
    let frames = clip
        .poses
        .iter()
        .map(|pose| {
            let points = template(pose.mouth_open)
                .into_iter()
                .map(|p| {
                    let (x, y) = pose.to_image(p);
                    Landmark {
                        x,
                        y,
                        confidence: 0.9 + rng.gen_range(-0.02..0.02),
                    }
                })
                .collect();
            Some(LandmarkFrame::new(points).expect("66 landmarks"))
        })
        .collect();
    let mut track = LandmarkTrack::new(frames);
    track.frame_size = Some((cfg.width, cfg.height));
    track
}

/// Adds sensor noise, clamps to `[0,1]`.
pub fn add_noise(frame: &Image, sigma: f64, rng: &mut impl Rng) -> Image {
    let normal = Normal::new(0.0, sigma.max(0.0)).expect("finite sigma");
    let mut out = frame.clone();
    for v in out.data_mut() {
        *v = (*v as f64 + normal.sample(rng)).clamp(0.0, 1.0) as f32;
    }
    out
}

/// Deterministic generator for one named stream of a corpus.
pub fn stream_rng(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    let mut z = seed;
    for &p in parts {
        z = vfd_train::derive_seed(z, p);
    }
    ChaCha8Rng::seed_from_u64(z)
}
