#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vfd_model::signal::{highpass_clip, temporal_noise_clip, threshold_and_filter, RangeNorm, TemporalNoiseConfig};
use vfd_tensor::{Tape, Tensor};

pub fn random_frame(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> Tensor<f64> {
    Tensor::from_fn(&[c, h, w], |_| rng.gen::<f64>())
}

/// Mirror index without edge repetition, written independently of the
/// library's helper.
pub fn mirror(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    (if m >= n as isize { period - m } else { m }) as usize
}

/// Direct (non-separable) 2-D Gaussian blur with mirrored borders.
pub fn blur_oracle(x: &Tensor<f64>, size: usize, sigma: f64) -> Tensor<f64> {
    let r = (size / 2) as isize;
    let mut k = vec![vec![0.0; size]; size];
    let mut z = 0.0;
    for dy in -r..=r {
        for dx in -r..=r {
            let v = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp();
            k[(dy + r) as usize][(dx + r) as usize] = v;
            z += v;
        }
    }
    let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let d = x.data();
    Tensor::from_fn(&[c, h, w], |idx| {
        let (ch, y, xx) = (idx / (h * w), (idx / w) % h, idx % w);
        let mut acc = 0.0;
        for dy in -r..=r {
            for dx in -r..=r {
                let sy = mirror(y as isize + dy, h);
                let sx = mirror(xx as isize + dx, w);
                acc += k[(dy + r) as usize][(dx + r) as usize] / z * d[(ch * h + sy) * w + sx];
            }
        }
        acc
    })
}

pub fn thr_oracle(f: f64, t: f64) -> f64 {
    let fac = 10.0 / t;
    let x = fac * (f - t);
    ((1.0 + x.exp()).ln() + 10.0 / (1.0 + (-x).exp())) / fac
}

/// Step-by-step evaluation of the six temporal-noise formulas over a clip.
/// Returns `T_i` for `i = 4 ..= n-4`.
pub fn temporal_oracle(clip: &[Tensor<f64>], t: f64, eps: f64, thresholded_diff: bool) -> Vec<Vec<f64>> {
    let n = clip.len();
    let low: Vec<Vec<f64>> = clip.iter().map(|f| blur_oracle(f, 49, 7.7).data().to_vec()).collect();
    let len = low[0].len();
    // step 2, defined for j = 1 ..= n-2
    let mut a = vec![vec![0.0; len]; n];
    for j in 1..n - 1 {
        for p in 0..len {
            a[j][p] = -0.25 * low[j - 1][p] + 0.5 * low[j][p] - 0.25 * low[j + 1][p];
        }
    }
    // step 3 over every available A
    let vals: Vec<f64> = (1..n - 1).flat_map(|j| a[j].clone()).collect();
    let mu = vals.iter().sum::<f64>() / vals.len() as f64;
    let dev = vals.iter().map(|v| (v - mu).abs()).fold(0.0, f64::max);
    let scale = 2.0 * dev + eps;
    let s: Vec<Vec<f64>> = a.iter().map(|r| r.iter().map(|v| (v - mu) / scale).collect()).collect();
    // step 4
    let ap: Vec<Vec<f64>> = s
        .iter()
        .map(|r| r.iter().map(|&v| if thresholded_diff { thr_oracle(v, t) - thr_oracle(-v, t) } else { v }).collect())
        .collect();
    // step 5, defined for j = 2 ..= n-2
    let mut g = vec![vec![0.0; len]; n];
    for j in 2..n - 1 {
        for p in 0..len {
            g[j][p] = (ap[j][p] - ap[j - 1][p]).abs();
        }
    }
    // step 6: G_{i-2} ..= G_{i+2}, reading F_{i-4} ..= F_{i+3}
    let taps = [1.0 / 32.0, 1.0 / 8.0, 3.0 / 16.0, 1.0 / 8.0, 1.0 / 32.0];
    (4..n - 3)
        .map(|i| {
            (0..len)
                .map(|p| (0..5).map(|m| taps[m] * g[i - 2 + m][p]).sum())
                .collect()
        })
        .collect()
}

/// Relative error between the backward-pass derivative of the summed
/// temporal noise in the threshold `t` and a Richardson-extrapolated
/// central difference.
pub fn threshold_gradient_error(t0: f64) -> f64 {
    // small fluctuations plus one bright frame: most normalized values land
    // near the threshold, where the derivative in t is not negligible
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let clip: Vec<Tensor<f64>> = (0..10)
        .map(|i| {
            let bump = if i == 5 { 0.4 } else { 0.0 };
            Tensor::from_fn(&[2, 8, 8], |_| 0.3 + bump + 0.05 * rng.gen::<f64>())
        })
        .collect();
    let cfg = TemporalNoiseConfig::default();
    let a = highpass_clip(&clip, &cfg).unwrap();
    let norm = RangeNorm::from_batch(a.iter(), cfg.norm_eps);
    let total = |t: f64| -> f64 {
        temporal_noise_clip(&clip, t, &cfg)
            .unwrap()
            .iter()
            .map(|(_, x)| x.data().iter().sum::<f64>())
            .sum()
    };
    let mut tape = Tape::new();
    let t = tape.param(Tensor::scalar(t0));
    let vars: Vec<_> = a.iter().map(|x| tape.constant(norm.apply(x))).collect();
    let outs = threshold_and_filter(&mut tape, &vars, t, &cfg).unwrap();
    let sums: Vec<_> = outs.iter().map(|&o| (tape.sum(o), 1.0)).collect();
    let loss = tape.weighted_sum(&sums).unwrap();
    let analytic = tape.backward(loss).unwrap().get(t).unwrap().data()[0];
    let central = |h: f64| (total(t0 + h) - total(t0 - h)) / (2.0 * h);
    // Richardson extrapolation removes the O(h^2) term
    let h = 1e-5;
    let numeric = (4.0 * central(h / 2.0) - central(h)) / 3.0;
    (analytic - numeric).abs() / numeric.abs().max(1e-12)
}
