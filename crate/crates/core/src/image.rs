//! Single-channel floating point images.
//!
//! Pixel `(x, y)` covers the unit square `[x, x + 1) × [y, y + 1)` and its
//! center sits at `(x + 0.5, y + 0.5)`. All continuous coordinates used by
//! the samplers and by the camera models follow this convention, so the
//! geometric center of a `w × h` image is `(w / 2, h / 2)`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Luma weights applied when converting color to grayscale.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch("pixel buffer length"));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    /// 8-bit grayscale, mapped to `[0, 1]`.
    pub fn from_luma8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != width * height {
            return Err(Error::DimensionMismatch("luma buffer length"));
        }
        Ok(Self {
            width,
            height,
            data: bytes.iter().map(|&b| f64::from(b) / 255.0).collect(),
        })
    }

    /// Interleaved 8-bit RGB, converted with [`LUMA_WEIGHTS`].
    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != 3 * width * height {
            return Err(Error::DimensionMismatch("rgb buffer length"));
        }
        let data = bytes
            .chunks_exact(3)
            .map(|px| {
                (LUMA_WEIGHTS[0] * f64::from(px[0])
                    + LUMA_WEIGHTS[1] * f64::from(px[1])
                    + LUMA_WEIGHTS[2] * f64::from(px[2]))
                    / 255.0
            })
            .collect();
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Quantizes to 8 bits with rounding and clamping.
    pub fn to_luma8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Mean of the outermost ring of pixels.
    pub fn border_mean(&self) -> f64 {
        if self.width == 0 || self.height == 0 {
            return 0.0;
        }
        let mut sum = 0.0;
        let mut n = 0usize;
        for x in 0..self.width {
            sum += self.get(x, 0);
            n += 1;
            if self.height > 1 {
                sum += self.get(x, self.height - 1);
                n += 1;
            }
        }
        for y in 1..self.height.saturating_sub(1) {
            sum += self.get(0, y);
            n += 1;
            if self.width > 1 {
                sum += self.get(self.width - 1, y);
                n += 1;
            }
        }
        sum / n as f64
    }

    /// Whether the continuous point `(u, v)` lies inside the image extent.
    #[inline]
    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u <= self.width as f64 && v <= self.height as f64
    }

    /// Bilinear sample at continuous coordinates; `None` outside the image.
    #[inline]
    pub fn sample(&self, u: f64, v: f64) -> Option<f64> {
        if !(u.is_finite() && v.is_finite()) || !self.contains(u, v) {
            return None;
        }
        Some(self.sample_clamped(u, v))
    }

    /// Bilinear sample with edge replication outside the image.
    #[inline]
    pub fn sample_clamped(&self, u: f64, v: f64) -> f64 {
        let w = self.width;
        let h = self.height;
        let x = (u - 0.5).clamp(0.0, (w - 1) as f64);
        let y = (v - 0.5).clamp(0.0, (h - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(w - 1);
        let y1 = (y0 + 1).min(h - 1);
        let ax = x - x0 as f64;
        let ay = y - y0 as f64;
        let top = self.get(x0, y0) * (1.0 - ax) + self.get(x1, y0) * ax;
        let bottom = self.get(x0, y1) * (1.0 - ax) + self.get(x1, y1) * ax;
        top * (1.0 - ay) + bottom * ay
    }

    /// Copies the `w × h` block whose top-left pixel is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::DimensionMismatch("crop exceeds image"));
        }
        let mut data = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            data.extend_from_slice(&self.row(y)[x0..x0 + w]);
        }
        Ok(Self {
            width: w,
            height: h,
            data,
        })
    }

    /// Writes `src` with its top-left pixel at `(x0, y0)`, clipping at the edges.
    pub fn paste(&mut self, src: &GrayImage, x0: i64, y0: i64) {
        for sy in 0..src.height {
            let dy = y0 + sy as i64;
            if dy < 0 || dy >= self.height as i64 {
                continue;
            }
            for sx in 0..src.width {
                let dx = x0 + sx as i64;
                if dx < 0 || dx >= self.width as i64 {
                    continue;
                }
                self.set(dx as usize, dy as usize, src.get(sx, sy));
            }
        }
    }

    /// Applies `a * v + b` to every pixel.
    pub fn affine(&self, a: f64, b: f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| a * v + b).collect(),
        }
    }

    /// Separable `(2r + 1)`-tap box filter with edge replication.
    pub fn box_blur(&self, radius: usize) -> Self {
        if radius == 0 {
            return self.clone();
        }
        let taps: Vec<f64> = vec![1.0 / (2 * radius + 1) as f64; 2 * radius + 1];
        self.separable(&taps)
    }

    /// Separable Gaussian blur, kernel truncated at 3σ.
    pub fn gaussian_blur(&self, sigma: f64) -> Self {
        if !(sigma > 0.0) {
            return self.clone();
        }
        let radius = (3.0 * sigma).ceil() as usize;
        let mut taps: Vec<f64> = (0..=2 * radius)
            .map(|i| {
                let d = i as f64 - radius as f64;
                (-(d * d) / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        let sum: f64 = taps.iter().sum();
        for t in &mut taps {
            *t /= sum;
        }
        self.separable(&taps)
    }

    fn separable(&self, taps: &[f64]) -> Self {
        let r = (taps.len() / 2) as i64;
        let (w, h) = (self.width as i64, self.height as i64);
        let mut tmp = vec![0.0; self.data.len()];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (k, t) in taps.iter().enumerate() {
                    let xx = (x + k as i64 - r).clamp(0, w - 1);
                    acc += t * self.data[(y * w + xx) as usize];
                }
                tmp[(y * w + x) as usize] = acc;
            }
        }
        let mut out = vec![0.0; self.data.len()];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (k, t) in taps.iter().enumerate() {
                    let yy = (y + k as i64 - r).clamp(0, h - 1);
                    acc += t * tmp[(yy * w + x) as usize];
                }
                out[(y * w + x) as usize] = acc;
            }
        }
        Self {
            width: self.width,
            height: self.height,
            data: out,
        }
    }

    /// Averages non-overlapping `stride × stride` blocks; trailing partial
    /// blocks are dropped.
    pub fn pool(&self, stride: usize) -> Self {
        if stride <= 1 {
            return self.clone();
        }
        let w = self.width / stride;
        let h = self.height / stride;
        let norm = 1.0 / (stride * stride) as f64;
        Self::from_fn(w, h, |x, y| {
            let mut acc = 0.0;
            for dy in 0..stride {
                let row = self.row(y * stride + dy);
                acc += row[x * stride..(x + 1) * stride].iter().sum::<f64>();
            }
            acc * norm
        })
    }

    /// Resamples by `scale` (output pixel `p` reads source `p / scale`).
    /// Downscaling pre-smooths with a Gaussian matched to the reduction.
    pub fn resize_by(&self, scale: f64, width: usize, height: usize) -> Self {
        let src = if scale < 1.0 {
            self.gaussian_blur(0.5 * (1.0 / (scale * scale) - 1.0).sqrt())
        } else {
            self.clone()
        };
        Self::from_fn(width, height, |x, y| {
            src.sample_clamped((x as f64 + 0.5) / scale, (y as f64 + 0.5) / scale)
        })
    }

    /// Warps through `dst_from_src`; returns the image and a validity mask.
    /// Pixels whose preimage falls outside the source take the source
    /// border mean and are marked invalid.
    pub fn warp(
        &self,
        dst_from_src: &Matrix3<f64>,
        width: usize,
        height: usize,
    ) -> Result<(Self, Vec<bool>)> {
        let inv = dst_from_src
            .try_inverse()
            .ok_or(Error::SingularHomography)?;
        let fill = self.border_mean();
        let mut mask = Vec::with_capacity(width * height);
        let out = Self::from_fn(width, height, |x, y| {
            let p = inv * Vector3::new(x as f64 + 0.5, y as f64 + 0.5, 1.0);
            let value = if p.z > 0.0 {
                self.sample(p.x / p.z, p.y / p.z)
            } else {
                None
            };
            mask.push(value.is_some());
            value.unwrap_or(fill)
        });
        Ok((out, mask))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> GrayImage {
        GrayImage::from_fn(6, 4, |x, y| x as f64 + 10.0 * y as f64)
    }

    #[test]
    fn bilinear_hits_pixel_centers() {
        let img = ramp();
        assert_eq!(img.sample(2.5, 1.5), Some(12.0));
        assert_eq!(img.sample(3.0, 1.5), Some(12.5));
        assert_eq!(img.sample(-0.1, 1.0), None);
        assert_eq!(img.sample_clamped(-3.0, 0.0), 0.0);
    }

    #[test]
    fn pool_averages_blocks() {
        let img = ramp();
        let p = img.pool(2);
        assert_eq!((p.width(), p.height()), (3, 2));
        assert!((p.get(0, 0) - 5.5).abs() < 1e-12);
    }

    #[test]
    fn blur_preserves_constants() {
        let img = GrayImage::filled(9, 7, 0.25);
        for v in img.gaussian_blur(1.3).data() {
            assert!((v - 0.25).abs() < 1e-12);
        }
        for v in img.box_blur(2).data() {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_warp_is_exact() {
        let img = ramp();
        let (w, mask) = img.warp(&Matrix3::identity(), 6, 4).unwrap();
        assert_eq!(w, img);
        assert!(mask.iter().all(|&m| m));
    }

    #[test]
    fn warp_marks_out_of_frame() {
        let img = ramp();
        let shift = Matrix3::new(1.0, 0.0, 3.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        let (w, mask) = img.warp(&shift, 6, 4).unwrap();
        assert!(!mask[0]);
        assert!(mask[3]);
        assert_eq!(w.get(3, 0), img.get(0, 0));
        assert_eq!(w.get(0, 0), img.border_mean());
    }

    #[test]
    fn luma_conversion() {
        let img = GrayImage::from_rgb8(1, 1, &[255, 255, 255]).unwrap();
        assert!((img.get(0, 0) - 1.0).abs() < 1e-12);
        assert_eq!(img.to_luma8(), vec![255]);
        assert!(GrayImage::from_luma8(2, 2, &[0; 3]).is_err());
    }
}
