//! Detector input transforms: color pass-through, the spatial high-pass
//! residual and the temporal-noise pipeline gated by the learnable soft
//! threshold.
//!
//! Temporal noise for frame `i` is built in six steps:
//!
//! 1. spatial Gaussian low-pass (49 px, sigma 7.7) of every frame;
//! 2. `A_j = -F_{j-1}/4 + F_j/2 - F_{j+1}/4`;
//! 3. batch normalization of `A` to `[0, 1]` with mean 1/2 (kept signed,
//!    i.e. centered at 0, for the next step);
//! 4. `A'_j = thr_t(A_j) - thr_t(-A_j)`;
//! 5. `G_j = |A'_j - A'_{j-1}|`;
//! 6. `T_i = G_{i-2}/32 + G_{i-1}/8 + 3 G_i/16 + G_{i+1}/8 + G_{i+2}/32`.
//!
//! `T_i` therefore reads frames `i-4 ..= i+3`.

use serde::{Deserialize, Serialize};
use vfd_media::Image;
use vfd_tensor::{Float, Tape, Tensor, Var};

use crate::{ModelError, Result};

pub const TEMPORAL_HIGHPASS_TAPS: [f64; 3] = [-0.25, 0.5, -0.25];
pub const TEMPORAL_LOWPASS_TAPS: [f64; 5] = [1.0 / 32.0, 1.0 / 8.0, 3.0 / 16.0, 1.0 / 8.0, 1.0 / 32.0];

/// Frames needed before the emitted frame.
pub const WINDOW_LEAD: usize = 4;
/// Frames needed after the emitted frame.
pub const WINDOW_TRAIL: usize = 3;
pub const WINDOW_LEN: usize = WINDOW_LEAD + 1 + WINDOW_TRAIL;
/// Number of high-passed frames `A_{i-3..=i+2}` that feed one output.
pub const STACK_LEN: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialHighpassConfig {
    pub kernel_size: usize,
    pub sigma: f64,
}

impl Default for SpatialHighpassConfig {
    fn default() -> Self {
        Self {
            kernel_size: 5,
            sigma: 1.1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TemporalNoiseConfig {
    pub lowpass_kernel_size: usize,
    pub lowpass_sigma: f64,
    pub threshold_init: f64,
    /// Difference the thresholded `A'` in step 5 (`false`: the raw `A`).
    pub diff_thresholded: bool,
    /// Stabilizer of the step-3 range normalization.
    pub norm_eps: f64,
}

impl Default for TemporalNoiseConfig {
    fn default() -> Self {
        Self {
            lowpass_kernel_size: 49,
            lowpass_sigma: 7.7,
            threshold_init: 1.0 / 40.0,
            diff_thresholded: true,
            norm_eps: 1e-4,
        }
    }
}

/// Smallest threshold the training loop keeps.
pub const MIN_THRESHOLD: f64 = 1e-6;

/// Frame in `[0,1]` as a `[3,H,W]` tensor. The dataset contract already
/// centers values at 1/2, so values pass through; out-of-range values are
/// clamped with a warning.
pub fn normalize_color<T: Float>(frame: &Image) -> Tensor<T> {
    let mut f = frame.clone();
    let clamped = f.clamp_unit();
    if clamped > 0 {
        log::warn!("normalize_color: clamped {clamped} out-of-range values");
    }
    f.to_tensor()
}

/// Normalized 1-D Gaussian taps.
pub fn gaussian_taps(size: usize, sigma: f64) -> Result<Vec<f64>> {
    if size % 2 == 0 || size == 0 {
        return Err(ModelError::Contract(format!("gaussian kernel size must be odd, got {size}")));
    }
    if sigma.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(ModelError::Contract(format!("gaussian sigma must be positive, got {sigma}")));
    }
    let r = (size / 2) as f64;
    let raw: Vec<f64> = (0..size).map(|i| (-(i as f64 - r).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
    let z: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|v| v / z).collect())
}

/// Separable sampled Gaussian as a `[size, size]` kernel summing to 1.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Result<Tensor<f64>> {
    let g = gaussian_taps(size, sigma)?;
    Ok(Tensor::from_fn(&[size, size], |i| g[i / size] * g[i % size]))
}

/// Mirror an out-of-range index back into `0..n` (edge pixel not repeated).
#[inline]
pub fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    (if m >= n as isize { period - m } else { m }) as usize
}

/// Separable filtering of every trailing `H×W` plane with reflect padding.
pub fn blur_reflect<T: Float>(x: &Tensor<T>, taps: &[f64]) -> Tensor<T> {
    let nd = x.ndim();
    assert!(nd >= 2, "blur needs at least two dimensions");
    let (h, w) = (x.shape()[nd - 2], x.shape()[nd - 1]);
    let r = (taps.len() / 2) as isize;
    let taps: Vec<T> = taps.iter().map(|&v| T::lit(v)).collect();
    let col_idx: Vec<Vec<usize>> = (0..w as isize)
        .map(|xo| (0..taps.len() as isize).map(|k| reflect(xo + k - r, w)).collect())
        .collect();
    let row_idx: Vec<Vec<usize>> = (0..h as isize)
        .map(|yo| (0..taps.len() as isize).map(|k| reflect(yo + k - r, h)).collect())
        .collect();
    let mut out = x.clone();
    let mut tmp = vec![T::zero(); h * w];
    for plane in out.data_mut().chunks_mut(h * w) {
        for y in 0..h {
            let row = &plane[y * w..(y + 1) * w];
            for xo in 0..w {
                tmp[y * w + xo] = col_idx[xo].iter().zip(&taps).map(|(&i, &g)| g * row[i]).sum();
            }
        }
        for v in plane.iter_mut() {
            *v = T::zero();
        }
        for (yo, idx) in row_idx.iter().enumerate() {
            for (&yi, &g) in idx.iter().zip(&taps) {
                let src = &tmp[yi * w..(yi + 1) * w];
                let dst = &mut plane[yo * w..(yo + 1) * w];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += g * s;
                }
            }
        }
    }
    out
}

/// `F/2 - (g*F)/2 + 1/2` with the 5×5, sigma 1.1 Gaussian.
pub fn spatial_highpass<T: Float>(frame: &Tensor<T>) -> Tensor<T> {
    spatial_highpass_with(frame, &SpatialHighpassConfig::default()).expect("default kernel is valid")
}

pub fn spatial_highpass_with<T: Float>(frame: &Tensor<T>, cfg: &SpatialHighpassConfig) -> Result<Tensor<T>> {
    let taps = gaussian_taps(cfg.kernel_size, cfg.sigma)?;
    let blurred = blur_reflect(frame, &taps);
    let half = T::lit(0.5);
    Ok(Tensor::from_vec(
        frame.shape().to_vec(),
        frame.data().iter().zip(blurred.data()).map(|(&f, &b)| half * (f - b) + half).collect(),
    )?)
}

/// Step 1.
pub fn spatial_lowpass<T: Float>(frame: &Tensor<T>, cfg: &TemporalNoiseConfig) -> Result<Tensor<T>> {
    Ok(blur_reflect(frame, &gaussian_taps(cfg.lowpass_kernel_size, cfg.lowpass_sigma)?))
}

/// Step 2 on already low-passed neighbours.
pub fn temporal_highpass<T: Float>(prev: &Tensor<T>, cur: &Tensor<T>, next: &Tensor<T>) -> Tensor<T> {
    let [a, b, c] = TEMPORAL_HIGHPASS_TAPS.map(T::lit);
    let data = prev
        .data()
        .iter()
        .zip(cur.data())
        .zip(next.data())
        .map(|((&p, &x), &n)| a * p + b * x + c * n)
        .collect();
    Tensor::from_vec(cur.shape().to_vec(), data).expect("neighbouring frames share a shape")
}

/// Steps 1–2 over a clip: returns `A_j` for `j = 1 ..= n-2` (index `j-1`).
pub fn highpass_clip<T: Float>(frames: &[Tensor<T>], cfg: &TemporalNoiseConfig) -> Result<Vec<Tensor<T>>> {
    if frames.len() < 3 {
        return Ok(Vec::new());
    }
    let low = frames.iter().map(|f| spatial_lowpass(f, cfg)).collect::<Result<Vec<_>>>()?;
    Ok(low.windows(3).map(|w| temporal_highpass(&w[0], &w[1], &w[2])).collect())
}

/// Step-3 statistics: values map to `(x - mean) / scale`, which lies in
/// `[-1/2, 1/2]`; adding 1/2 gives the `[0,1]`, mean-1/2 form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RangeNorm {
    pub mean: f64,
    pub scale: f64,
}

impl RangeNorm {
    pub fn from_batch<'a, T: Float>(values: impl IntoIterator<Item = &'a Tensor<T>>, eps: f64) -> RangeNorm {
        let tensors: Vec<&Tensor<T>> = values.into_iter().collect();
        let count: usize = tensors.iter().map(|t| t.numel()).sum();
        if count == 0 {
            return RangeNorm { mean: 0.0, scale: eps };
        }
        let mean = tensors.iter().flat_map(|t| t.data()).map(|v| v.to_f64_lossy()).sum::<f64>() / count as f64;
        let max_dev = tensors
            .iter()
            .flat_map(|t| t.data())
            .map(|v| (v.to_f64_lossy() - mean).abs())
            .fold(0.0, f64::max);
        RangeNorm {
            mean,
            scale: 2.0 * max_dev + eps,
        }
    }

    /// Signed (zero-centered) normalized values.
    pub fn apply<T: Float>(&self, x: &Tensor<T>) -> Tensor<T> {
        let (m, s) = (T::lit(self.mean), T::lit(self.scale));
        x.map(|v| (v - m) / s)
    }
}

/// Running step-3 statistics used in evaluation mode.
#[derive(Clone, Debug, PartialEq)]
pub struct RangeNormState {
    pub running: Option<RangeNorm>,
    pub momentum: f64,
}

impl Default for RangeNormState {
    fn default() -> Self {
        Self {
            running: None,
            momentum: 0.1,
        }
    }
}

impl RangeNormState {
    pub fn update(&mut self, batch: RangeNorm) {
        self.running = Some(match self.running {
            None => batch,
            Some(r) => RangeNorm {
                mean: (1.0 - self.momentum) * r.mean + self.momentum * batch.mean,
                scale: (1.0 - self.momentum) * r.scale + self.momentum * batch.scale,
            },
        });
    }

    /// Batch statistics in training mode (recorded), running ones otherwise.
    pub fn resolve(&mut self, batch: RangeNorm, training: bool) -> RangeNorm {
        if training {
            self.update(batch);
            batch
        } else {
            self.running.unwrap_or(batch)
        }
    }
}

/// Steps 4–6 on the tape. `normalized` holds signed step-3 outputs for
/// consecutive frames `j0, j0+1, ...`; returns one `T_i` per complete
/// 6-frame sub-window (`normalized.len() - 5` outputs).
pub fn threshold_and_filter<T: Float>(
    tape: &mut Tape<T>,
    normalized: &[Var],
    t: Var,
    cfg: &TemporalNoiseConfig,
) -> Result<Vec<Var>> {
    if normalized.len() < STACK_LEN {
        return Err(ModelError::Contract(format!(
            "temporal noise needs {STACK_LEN} high-passed frames, got {}",
            normalized.len()
        )));
    }
    let signal: Vec<Var> = if cfg.diff_thresholded {
        normalized
            .iter()
            .map(|&a| {
                let pos = tape.soft_threshold(a, t)?;
                let na = tape.neg(a);
                let neg = tape.soft_threshold(na, t)?;
                Ok(tape.sub(pos, neg)?)
            })
            .collect::<Result<_>>()?
    } else {
        normalized.to_vec()
    };
    let g: Vec<Var> = signal
        .windows(2)
        .map(|w| {
            let d = tape.sub(w[1], w[0])?;
            Ok(tape.abs(d))
        })
        .collect::<Result<_>>()?;
    let taps = TEMPORAL_LOWPASS_TAPS.map(T::lit);
    g.windows(5)
        .map(|w| {
            let terms: Vec<(Var, T)> = w.iter().copied().zip(taps).collect();
            Ok(tape.weighted_sum(&terms)?)
        })
        .collect()
}

/// Eight consecutive frames `F_{i-4} ..= F_{i+3}` around emitted frame `i`.
#[derive(Clone, Debug)]
pub struct FrameWindow<T> {
    frames: Vec<Tensor<T>>,
    center: usize,
}

impl<T: Float> FrameWindow<T> {
    pub fn new(frames: Vec<Tensor<T>>, center: usize) -> Result<Self> {
        if frames.len() != WINDOW_LEN {
            return Err(ModelError::Contract(format!(
                "frame window needs {WINDOW_LEN} frames, got {}",
                frames.len()
            )));
        }
        if frames.iter().any(|f| f.shape() != frames[0].shape()) {
            return Err(ModelError::Contract("frame window shapes differ".into()));
        }
        Ok(Self { frames, center })
    }

    /// Window of `clip` centered on frame `i`, if the margins allow it.
    pub fn from_clip(clip: &[Tensor<T>], i: usize) -> Result<Self> {
        if i < WINDOW_LEAD || i + WINDOW_TRAIL >= clip.len() {
            return Err(ModelError::Contract(format!(
                "frame {i} lacks temporal context in a clip of {} frames",
                clip.len()
            )));
        }
        Self::new(clip[i - WINDOW_LEAD..=i + WINDOW_TRAIL].to_vec(), i)
    }

    pub fn frames(&self) -> &[Tensor<T>] {
        &self.frames
    }

    pub fn center(&self) -> usize {
        self.center
    }
}

/// Temporal noise `T_i` of one window, normalizing with the window's own
/// statistics.
pub fn temporal_noise<T: Float>(window: &FrameWindow<T>, t: T, cfg: &TemporalNoiseConfig) -> Result<Tensor<T>> {
    let mut out = temporal_noise_clip(window.frames(), t, cfg)?;
    Ok(out.pop().expect("one output per window").1)
}

/// `(i, T_i)` for every frame of a clip with full temporal context
/// (`WINDOW_LEAD <= i < n - WINDOW_TRAIL`). Step-3 statistics cover all
/// high-passed frames of the clip.
pub fn temporal_noise_clip<T: Float>(clip: &[Tensor<T>], t: T, cfg: &TemporalNoiseConfig) -> Result<Vec<(usize, Tensor<T>)>> {
    if clip.len() < WINDOW_LEN {
        return Err(ModelError::Contract(format!(
            "clip of {} frames is shorter than the {WINDOW_LEN}-frame window",
            clip.len()
        )));
    }
    let a = highpass_clip(clip, cfg)?;
    let norm = RangeNorm::from_batch(a.iter(), cfg.norm_eps);
    let mut tape = Tape::new();
    let tv = tape.constant(Tensor::scalar(t));
    let vars: Vec<Var> = a.iter().map(|x| tape.constant(norm.apply(x))).collect();
    let out = threshold_and_filter(&mut tape, &vars, tv, cfg)?;
    Ok(out
        .into_iter()
        .enumerate()
        .map(|(k, v)| (k + WINDOW_LEAD, tape.value(v).clone()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_indices() {
        assert_eq!(reflect(-1, 5), 1);
        assert_eq!(reflect(-2, 5), 2);
        assert_eq!(reflect(5, 5), 3);
        assert_eq!(reflect(6, 5), 2);
        assert_eq!(reflect(-30, 4), 0);
        assert_eq!(reflect(3, 1), 0);
    }

    #[test]
    fn even_kernel_rejected() {
        assert!(gaussian_kernel(4, 1.0).is_err());
        assert!(gaussian_kernel(3, 0.0).is_err());
    }

    #[test]
    fn lowpass_taps_sum_to_half() {
        assert_eq!(TEMPORAL_LOWPASS_TAPS.iter().sum::<f64>(), 0.5);
        assert_eq!(TEMPORAL_LOWPASS_TAPS, [0.03125, 0.125, 0.1875, 0.125, 0.03125]);
        assert_eq!(TEMPORAL_HIGHPASS_TAPS, [-0.25, 0.5, -0.25]);
    }

    #[test]
    fn window_margins() {
        let clip: Vec<Tensor<f64>> = (0..10).map(|_| Tensor::zeros(&[3, 2, 2])).collect();
        assert!(FrameWindow::from_clip(&clip, 3).is_err());
        assert!(FrameWindow::from_clip(&clip, 4).is_ok());
        assert!(FrameWindow::from_clip(&clip, 6).is_ok());
        assert!(FrameWindow::from_clip(&clip, 7).is_err());
    }
}
