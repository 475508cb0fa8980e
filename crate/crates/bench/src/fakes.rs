//! Face-region manipulations that turn a real clip into its fake pair.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use vfd_media::Image;
use vfd_model::signal::{blur_reflect, gaussian_taps};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FakeKind {
    /// Face region low-passed; visible in the spatial residual.
    SpatialBlur,
    /// Chroma offset on the face; visible in color.
    ColorShift,
    /// Per-frame random-sign brightness offset on the face with the frame
    /// statistics restored; visible only across frames.
    TemporalFlicker,
}

impl FakeKind {
    pub const ALL: [FakeKind; 3] = [FakeKind::SpatialBlur, FakeKind::ColorShift, FakeKind::TemporalFlicker];

    pub fn name(self) -> &'static str {
        match self {
            FakeKind::SpatialBlur => "spatial_blur",
            FakeKind::ColorShift => "color_shift",
            FakeKind::TemporalFlicker => "temporal_flicker",
        }
    }

    /// Strength used when none is configured: blur sigma in pixels, or
    /// offset amplitude.
    pub fn default_strength(self) -> f64 {
        match self {
            FakeKind::SpatialBlur => 1.2,
            FakeKind::ColorShift => 0.06,
            FakeKind::TemporalFlicker => 0.05,
        }
    }
}

impl fmt::Display for FakeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FakeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        FakeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown fake kind {s:?} (expected spatial_blur, color_shift or temporal_flicker)"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FakeRecipe {
    pub kind: FakeKind,
    pub strength: f64,
}

impl FakeRecipe {
    pub fn new(kind: FakeKind) -> Self {
        Self {
            kind,
            strength: kind.default_strength(),
        }
    }
}

fn blend(frame: &Image, other: &Image, mask: &[f32]) -> Image {
    let plane = frame.width() * frame.height();
    let mut out = frame.clone();
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        let a = mask[i % plane];
        *v = a * other.data()[i] + (1.0 - a) * *v;
    }
    out
}

fn gaussian_blur(frame: &Image, sigma: f64) -> Image {
    let size = 2 * (3.0 * sigma).ceil() as usize + 1;
    let taps = gaussian_taps(size, sigma).expect("odd kernel with positive sigma");
    let t = blur_reflect(&frame.to_tensor::<f32>(), &taps);
    Image::from_tensor(&t).expect("blur keeps the frame shape")
}

/// Applies a spatial manipulation to one clean frame.
pub fn apply_spatial(recipe: &FakeRecipe, frame: &Image, mask: &[f32]) -> Image {
    match recipe.kind {
        FakeKind::SpatialBlur => blend(frame, &gaussian_blur(frame, recipe.strength), mask),
        FakeKind::ColorShift => {
            let plane = frame.width() * frame.height();
            let mut out = frame.clone();
            let shift = [recipe.strength as f32, 0.0, -(recipe.strength as f32)];
            for (i, v) in out.data_mut().iter_mut().enumerate() {
                *v += mask[i % plane] * shift[i / plane];
            }
            out
        }
        FakeKind::TemporalFlicker => frame.clone(),
    }
}

/// Per-frame signs of a flicker fake.
pub fn flicker_signs(n: usize, rng: &mut impl Rng) -> Vec<f32> {
    (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect()
}

/// Offsets the face by `sign * strength`, then maps the frame affinely so
/// its mean and variance equal those of `reference`.
pub fn flicker_frame(noisy: &Image, mask: &[f32], sign: f32, strength: f64, reference: &Image) -> Image {
    let plane = noisy.width() * noisy.height();
    let mut out = noisy.clone();
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        *v += sign * strength as f32 * mask[i % plane];
    }
    let (m, s) = (out.mean(), out.variance().sqrt());
    let (rm, rs) = (reference.mean(), reference.variance().sqrt());
    let gain = if s > 0.0 { rs / s } else { 1.0 };
    for v in out.data_mut() {
        *v = ((*v as f64 - m) * gain + rm) as f32;
    }
    out
}
