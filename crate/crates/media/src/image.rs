use std::path::Path;

use serde::{Deserialize, Serialize};
use vfd_tensor::{Float, Tensor};

use crate::{MediaError, Result};

/// Square face box: center and side length in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub cx: f64,
    pub cy: f64,
    pub side: f64,
}

/// Planar RGB image, values nominally in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, [0.0; 3])
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(3 * width * height);
        for v in rgb {
            data.extend(std::iter::repeat_n(v, width * height));
        }
        Self { width, height, data }
    }

    pub fn from_planar(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != 3 * width * height {
            return Err(MediaError::Invalid(format!(
                "{width}x{height} image needs {} values, got {}",
                3 * width * height,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(3 * width * height);
        for c in 0..3 {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, x, y));
                }
            }
        }
        Self { width, height, data }
    }

    /// 8-bit interleaved RGB; 255 maps to exactly 1.0.
    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != 3 * width * height {
            return Err(MediaError::Invalid("rgb8 buffer size mismatch".into()));
        }
        Ok(Self::from_fn(width, height, |c, x, y| bytes[(y * width + x) * 3 + c] as f32 / 255.0))
    }

    pub fn to_rgb8(&self) -> Vec<u8> {
        let mut out = vec![0u8; 3 * self.width * self.height];
        for y in 0..self.height {
            for x in 0..self.width {
                for c in 0..3 {
                    out[(y * self.width + x) * 3 + c] = (self.get(c, x, y).clamp(0.0, 1.0) * 255.0).round() as u8;
                }
            }
        }
        out
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        &self.data[c * self.width * self.height..(c + 1) * self.width * self.height]
    }

    #[inline]
    pub fn get(&self, c: usize, x: usize, y: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, x: usize, y: usize, v: f32) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    /// Population variance over all channels.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.data.iter().map(|&v| (v as f64 - m).powi(2)).sum::<f64>() / self.data.len() as f64
    }

    pub fn mse(&self, other: &Image) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| ((a - b) as f64).powi(2))
            .sum::<f64>()
            / self.data.len() as f64
    }

    /// Bilinear sample at continuous pixel coordinates (pixel centers at
    /// integers); outside the image the sample is 0.
    pub fn sample(&self, c: usize, x: f64, y: f64) -> f32 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = (x - x0) as f32;
        let fy = (y - y0) as f32;
        let px = |xi: f64, yi: f64| -> f32 {
            if xi < 0.0 || yi < 0.0 || xi >= self.width as f64 || yi >= self.height as f64 {
                0.0
            } else {
                self.get(c, xi as usize, yi as usize)
            }
        };
        let top = px(x0, y0) * (1.0 - fx) + px(x0 + 1.0, y0) * fx;
        let bottom = px(x0, y0 + 1.0) * (1.0 - fx) + px(x0 + 1.0, y0 + 1.0) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Like [`Image::sample`] but clamps coordinates to the border.
    pub fn sample_clamped(&self, c: usize, x: f64, y: f64) -> f32 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = (x - x0 as f64) as f32;
        let fy = (y - y0 as f64) as f32;
        let top = self.get(c, x0, y0) * (1.0 - fx) + self.get(c, x1, y0) * fx;
        let bottom = self.get(c, x0, y1) * (1.0 - fx) + self.get(c, x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Bilinear resize with pixel-center alignment.
    pub fn resize(&self, width: usize, height: usize) -> Image {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        Image::from_fn(width, height, |c, x, y| {
            self.sample_clamped(c, (x as f64 + 0.5) * sx - 0.5, (y as f64 + 0.5) * sy - 0.5)
        })
    }

    /// Square crop around `(cx, cy)` with the given side, bilinearly scaled to
    /// `out × out`. Regions outside the frame read as 0.
    pub fn crop_square(&self, cx: f64, cy: f64, side: f64, out: usize) -> Image {
        let scale = side / out as f64;
        let x0 = cx - side / 2.0;
        let y0 = cy - side / 2.0;
        Image::from_fn(out, out, |c, x, y| {
            self.sample(c, x0 + (x as f64 + 0.5) * scale - 0.5, y0 + (y as f64 + 0.5) * scale - 0.5)
        })
    }

    /// Clamp to `[0, 1]`, returning how many values were out of range.
    pub fn clamp_unit(&mut self) -> usize {
        let mut n = 0;
        for v in &mut self.data {
            if !(0.0..=1.0).contains(v) {
                n += 1;
                *v = v.clamp(0.0, 1.0);
            }
        }
        n
    }

    /// `[3, H, W]` tensor.
    pub fn to_tensor<T: Float>(&self) -> Tensor<T> {
        Tensor::from_vec(
            vec![3, self.height, self.width],
            self.data.iter().map(|&v| T::lit(v as f64)).collect(),
        )
        .expect("image buffer matches its shape")
    }

    pub fn from_tensor<T: Float>(t: &Tensor<T>) -> Result<Image> {
        match t.shape() {
            &[3, h, w] => Image::from_planar(w, h, t.data().iter().map(|v| v.to_f64_lossy() as f32).collect()),
            s => Err(MediaError::Invalid(format!("expected [3,H,W] tensor, got {s:?}"))),
        }
    }

    pub fn load_png(path: &Path) -> Result<Image> {
        let img = ::image::open(path).map_err(|source| MediaError::Codec {
            path: path.display().to_string(),
            source,
        })?;
        let rgb = img.to_rgb8();
        Image::from_rgb8(rgb.width() as usize, rgb.height() as usize, rgb.as_raw())
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let buf = ::image::RgbImage::from_raw(self.width as u32, self.height as u32, self.to_rgb8())
            .ok_or_else(|| MediaError::Invalid("rgb buffer".into()))?;
        buf.save(path).map_err(|source| MediaError::Codec {
            path: path.display().to_string(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_scale_convention() {
        let img = Image::from_rgb8(1, 1, &[255, 0, 128]).unwrap();
        assert_eq!(img.get(0, 0, 0), 1.0);
        assert_eq!(img.get(1, 0, 0), 0.0);
        assert_eq!(img.to_rgb8(), vec![255, 0, 128]);
    }

    #[test]
    fn resize_identity_and_constant() {
        let img = Image::from_fn(5, 4, |c, x, y| (c + x + y) as f32 / 10.0);
        assert_eq!(img.resize(5, 4), img);
        let flat = Image::filled(10, 10, [0.3, 0.3, 0.3]).resize(7, 3);
        assert!(flat.data().iter().all(|&v| (v - 0.3).abs() < 1e-6));
    }

    #[test]
    fn crop_of_whole_frame_is_identity() {
        let img = Image::from_fn(8, 8, |c, x, y| (c * 64 + y * 8 + x) as f32 / 200.0);
        let crop = img.crop_square(4.0, 4.0, 8.0, 8);
        assert!(crop.data().iter().zip(img.data()).all(|(a, b)| (a - b).abs() < 1e-6));
    }
}
