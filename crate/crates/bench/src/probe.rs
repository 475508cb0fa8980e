//! Frame-statistics probe: a logistic regression on per-frame mean and
//! variance. Fakes that leave single-frame statistics intact keep it near
//! chance.

use vfd_media::Image;

fn features(frame: &Image) -> [f64; 2] {
    [frame.mean(), frame.variance()]
}

/// Trains on even-indexed pairs, reports accuracy on odd-indexed ones.
/// `real` and `fake` are matched frame lists.
pub fn frame_statistics_probe(real: &[Image], fake: &[Image]) -> f64 {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (k, (r, f)) in real.iter().zip(fake).enumerate() {
        let set = if k % 2 == 0 { &mut train } else { &mut test };
        set.push((features(r), 0.0));
        set.push((features(f), 1.0));
    }
    if train.is_empty() || test.is_empty() {
        return 0.5;
    }
    // standardize with training statistics
    let n = train.len() as f64;
    let mut mu = [0.0; 2];
    let mut sd = [0.0; 2];
    for d in 0..2 {
        mu[d] = train.iter().map(|(x, _)| x[d]).sum::<f64>() / n;
        sd[d] = (train.iter().map(|(x, _)| (x[d] - mu[d]).powi(2)).sum::<f64>() / n).sqrt().max(1e-12);
    }
    let z = |x: &[f64; 2]| [(x[0] - mu[0]) / sd[0], (x[1] - mu[1]) / sd[1]];
    let mut w = [0.0; 3];
    for _ in 0..2000 {
        let mut g = [0.0; 3];
        for (x, y) in &train {
            let x = z(x);
            let p = 1.0 / (1.0 + (-(w[0] * x[0] + w[1] * x[1] + w[2])).exp());
            g[0] += (p - y) * x[0];
            g[1] += (p - y) * x[1];
            g[2] += p - y;
        }
        for d in 0..3 {
            w[d] -= 0.5 * g[d] / n;
        }
    }
    let correct = test
        .iter()
        .filter(|(x, y)| {
            let x = z(x);
            let s = w[0] * x[0] + w[1] * x[1] + w[2];
            (s > 0.0) == (*y > 0.5)
        })
        .count();
    correct as f64 / test.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_brightness_offsets() {
        let real: Vec<Image> = (0..40).map(|k| Image::filled(4, 4, [0.3 + 0.001 * k as f32; 3])).collect();
        let fake: Vec<Image> = (0..40).map(|k| Image::filled(4, 4, [0.5 + 0.001 * k as f32; 3])).collect();
        assert_eq!(frame_statistics_probe(&real, &fake), 1.0);
    }

    #[test]
    fn identical_statistics_are_chance() {
        let real: Vec<Image> = (0..40).map(|k| Image::filled(4, 4, [0.3 + 0.001 * k as f32; 3])).collect();
        assert!(frame_statistics_probe(&real, &real) <= 0.55);
    }
}
