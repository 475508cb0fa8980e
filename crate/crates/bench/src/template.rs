//! A 66-point face layout in face coordinates: unit half-width, `y` down,
//! origin at the face center.

/// Indices of the landmark groups, in template order.
pub const JAW: std::ops::Range<usize> = 0..17;
pub const BROWS: std::ops::Range<usize> = 17..27;
pub const NOSE: std::ops::Range<usize> = 27..36;
pub const EYES: std::ops::Range<usize> = 36..48;
pub const MOUTH: std::ops::Range<usize> = 48..66;

/// Face outline: half-height over half-width.
pub const FACE_ASPECT: f64 = 1.3;

pub const EYE_CENTERS: [(f64, f64); 2] = [(-0.4, -0.25), (0.4, -0.25)];
pub const EYE_RADII: (f64, f64) = (0.15, 0.07);
pub const MOUTH_CENTER: (f64, f64) = (0.0, 0.6);
pub const MOUTH_RADII: (f64, f64) = (0.35, 0.12);

fn ellipse(n: usize, c: (f64, f64), r: (f64, f64)) -> impl Iterator<Item = (f64, f64)> {
    (0..n).map(move |k| {
        let a = std::f64::consts::TAU * k as f64 / n as f64;
        (c.0 + r.0 * a.cos(), c.1 + r.1 * a.sin())
    })
}

/// Template points with the mouth opened by `open` (1 = neutral).
pub fn template(open: f64) -> Vec<(f64, f64)> {
    let mut p = Vec::with_capacity(66);
    // jaw: lower half of the outline, left to right
    p.extend((0..17).map(|k| {
        let a = std::f64::consts::PI * (1.0 - k as f64 / 16.0);
        (0.95 * a.cos(), 0.1 + 1.1 * a.sin())
    }));
    for side in [-1.0, 1.0] {
        p.extend((0..5).map(|k| {
            let x = side * (0.2 + 0.5 * k as f64 / 4.0);
            let arc = (k as f64 - 2.0) / 2.0;
            (x, -0.45 - 0.06 * (1.0 - arc * arc))
        }));
    }
    p.extend((0..4).map(|k| (0.0, -0.3 + 0.15 * k as f64)));
    p.extend((0..5).map(|k| (-0.2 + 0.1 * k as f64, 0.25)));
    for c in EYE_CENTERS {
        p.extend(ellipse(6, c, EYE_RADII));
    }
    p.extend(ellipse(12, MOUTH_CENTER, (MOUTH_RADII.0, MOUTH_RADII.1 * open)));
    p.extend(ellipse(6, MOUTH_CENTER, (0.6 * MOUTH_RADII.0, 0.4 * MOUTH_RADII.1 * open)));
    debug_assert_eq!(p.len(), 66);
    p
}
