//! Convex-hull masking and face-centered square crops.
//!
//! Landmark coordinates put pixel centers at integer positions: pixel
//! `(x, y)` is inside the hull when the point `(x, y)` is (boundary
//! included).

use vfd_media::{BBox, Image};

use crate::track::LandmarkFrame;
use crate::{MiningError, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CropConfig {
    /// Crop side relative to the larger landmark bounding-box side.
    pub margin: f64,
    pub output_size: usize,
}

impl Default for CropConfig {
    fn default() -> Self {
        Self {
            margin: 1.3,
            output_size: 256,
        }
    }
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Counter-clockwise convex hull (monotone chain). Fails when the points
/// span no area.
pub fn convex_hull(points: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite landmark coordinates"));
    pts.dedup();
    if pts.len() < 3 {
        return Err(MiningError::DegenerateHull(format!("{} distinct points", pts.len())));
    }
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let base = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> = if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= base + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    let area2: f64 = (0..hull.len()).map(|i| cross((0.0, 0.0), hull[i], hull[(i + 1) % hull.len()])).sum();
    if hull.len() < 3 || area2.abs() < 1e-9 {
        return Err(MiningError::DegenerateHull("landmarks are collinear".into()));
    }
    Ok(hull)
}

/// Point-in-convex-polygon test for a counter-clockwise hull, boundary
/// inclusive.
pub fn hull_contains(hull: &[(f64, f64)], p: (f64, f64)) -> bool {
    (0..hull.len()).all(|i| cross(hull[i], hull[(i + 1) % hull.len()], p) >= -1e-9)
}

fn landmark_points(lm: &LandmarkFrame) -> Vec<(f64, f64)> {
    lm.points().iter().map(|p| (p.x, p.y)).collect()
}

/// Zeroes every pixel outside the landmarks' convex hull.
pub fn mask_outside_hull(frame: &Image, lm: &LandmarkFrame) -> Result<Image> {
    let hull = convex_hull(&landmark_points(lm))?;
    let (x0, y0, x1, y1) = lm.bounds();
    let mut out = Image::new(frame.width(), frame.height());
    for y in 0..frame.height() {
        if (y as f64) < y0 || (y as f64) > y1 {
            continue;
        }
        for x in 0..frame.width() {
            if (x as f64) < x0 || (x as f64) > x1 || !hull_contains(&hull, (x as f64, y as f64)) {
                continue;
            }
            for c in 0..3 {
                out.set(c, x, y, frame.get(c, x, y));
            }
        }
    }
    Ok(out)
}

/// Square crop around the landmark bounding-box center; side is the larger
/// box side times `margin`.
pub fn crop_box(lm: &LandmarkFrame, margin: f64) -> BBox {
    let (x0, y0, x1, y1) = lm.bounds();
    BBox {
        cx: (x0 + x1) / 2.0,
        cy: (y0 + y1) / 2.0,
        side: (x1 - x0).max(y1 - y0) * margin,
    }
}

/// Masks the background, then crops the face square and rescales it
/// bilinearly to `cfg.output_size`.
pub fn mask_and_crop(frame: &Image, lm: &LandmarkFrame, cfg: &CropConfig) -> Result<Image> {
    let masked = mask_outside_hull(frame, lm)?;
    let b = crop_box(lm, cfg.margin);
    // Image::crop_square addresses pixel areas, whose centers sit at +0.5.
    Ok(masked.crop_square(b.cx + 0.5, b.cy + 0.5, b.side, cfg.output_size))
}
