//! Deterministic matching backend: pyramids, normalized cross-correlation
//! and in-plane rotation banks. Features are plain intensities; anything
//! that produces a per-pixel grid can be correlated the same way.

use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Smallest side length allowed in a pyramid level.
pub const MIN_LEVEL_SIZE: usize = 8;

/// Windows with variance below this (per pixel) are treated as flat.
const FLAT_VARIANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Pyramid {
    pub levels: Vec<GrayImage>,
    pub factor: f64,
}

impl Pyramid {
    /// Size of `level` relative to level 0.
    pub fn scale(&self, level: usize) -> f64 {
        self.factor.powi(-(level as i32))
    }
}

fn level_dim(base: usize, factor: f64, level: usize) -> usize {
    let d = base as f64 / factor.powi(level as i32);
    (d - 1e-9).ceil().max(0.0) as usize
}

/// Builds `n_levels` levels, level `k` being `ceil(size_0 / factor^k)` on
/// each side. Each level is box filtered and resampled from the previous
/// one at exactly `1 / factor`, so level `k` is the base image scaled by
/// `factor^-k`.
pub fn build_pyramid(image: &GrayImage, n_levels: usize, factor: f64) -> Result<Pyramid> {
    if n_levels == 0 {
        return Err(Error::InvalidConfig("pyramid needs at least one level"));
    }
    if !(factor > 1.0) {
        return Err(Error::InvalidConfig("pyramid factor must exceed 1"));
    }
    let (w0, h0) = (image.width(), image.height());
    for k in 0..n_levels {
        let (w, h) = (level_dim(w0, factor, k), level_dim(h0, factor, k));
        if w < MIN_LEVEL_SIZE || h < MIN_LEVEL_SIZE {
            return Err(Error::ImageTooSmall {
                width: w,
                height: h,
            });
        }
    }
    let mut levels = Vec::with_capacity(n_levels);
    levels.push(image.clone());
    for k in 1..n_levels {
        let prev = levels[k - 1].box_blur(1);
        let (w, h) = (level_dim(w0, factor, k), level_dim(h0, factor, k));
        levels.push(GrayImage::from_fn(w, h, |x, y| {
            prev.sample_clamped((x as f64 + 0.5) * factor, (y as f64 + 0.5) * factor)
        }));
    }
    Ok(Pyramid { levels, factor })
}

/// Dense correlation scores for one template.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub scale_id: usize,
    pub angle_id: usize,
}

impl ScoreMap {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Location and value of the maximum; ties resolve to the first in
    /// row-major order.
    pub fn argmax(&self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &v) in self.values.iter().enumerate() {
            if best.map_or(true, |(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, v)| (i % self.width, i / self.width, v))
    }
}

/// Zero-mean, unit-variance normalized dot product of two equally sized
/// grids. A flat input yields [`Error::ZeroVariance`]; callers score it 0.
pub fn ncc(template: &GrayImage, window: &GrayImage) -> Result<f64> {
    if template.width() != window.width() || template.height() != window.height() {
        return Err(Error::DimensionMismatch("ncc operands"));
    }
    ncc_slices(template.data(), window.data())
}

fn ncc_slices(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    if a.is_empty() {
        return Err(Error::ZeroVariance);
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= FLAT_VARIANCE * n || sbb <= FLAT_VARIANCE * n {
        return Err(Error::ZeroVariance);
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// NCC restricted to pixels valid in both masks (`None` = all valid).
pub fn masked_ncc(
    a: &GrayImage,
    mask_a: Option<&[bool]>,
    b: &GrayImage,
    mask_b: Option<&[bool]>,
) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::DimensionMismatch("masked ncc operands"));
    }
    let valid = |i: usize| mask_a.map_or(true, |m| m[i]) && mask_b.map_or(true, |m| m[i]);
    let mut xs = Vec::with_capacity(a.data().len());
    let mut ys = Vec::with_capacity(a.data().len());
    for i in 0..a.data().len() {
        if valid(i) {
            xs.push(a.data()[i]);
            ys.push(b.data()[i]);
        }
    }
    ncc_slices(&xs, &ys)
}

/// Valid-mode dense NCC of `template` over `image`. Entry `(x, y)` scores
/// the window whose top-left pixel is `(x, y)`. Flat windows score 0.
pub fn correlate_all(template: &GrayImage, image: &GrayImage) -> Result<ScoreMap> {
    let (tw, th) = (template.width(), template.height());
    if tw == 0 || th == 0 || tw > image.width() || th > image.height() {
        return Err(Error::DimensionMismatch("template larger than image"));
    }
    let n = (tw * th) as f64;
    let mean_t = template.mean();
    let centered: Vec<f64> = template.data().iter().map(|v| v - mean_t).collect();
    let norm_t2: f64 = centered.iter().map(|v| v * v).sum();
    if norm_t2 <= FLAT_VARIANCE * n {
        return Err(Error::ZeroVariance);
    }
    let norm_t = norm_t2.sqrt();
    let (mw, mh) = (image.width() - tw + 1, image.height() - th + 1);
    let mut values = Vec::with_capacity(mw * mh);
    for y in 0..mh {
        for x in 0..mw {
            let (mut dot, mut s, mut ss) = (0.0, 0.0, 0.0);
            for ty in 0..th {
                let row = &image.row(y + ty)[x..x + tw];
                let trow = &centered[ty * tw..(ty + 1) * tw];
                for (&w, &t) in row.iter().zip(trow) {
                    dot += t * w;
                    s += w;
                    ss += w * w;
                }
            }
            let var_n = ss - s * s / n;
            let v = if var_n <= FLAT_VARIANCE * n {
                0.0
            } else {
                (dot / (norm_t * var_n.sqrt())).clamp(-1.0, 1.0)
            };
            values.push(v);
        }
    }
    Ok(ScoreMap {
        width: mw,
        height: mh,
        values,
        scale_id: 0,
        angle_id: 0,
    })
}

/// Offset of the vertex of the parabola through `(−1, a)`, `(0, b)`,
/// `(1, c)`, clamped to `[−0.5, 0.5]`.
pub fn parabolic_offset(a: f64, b: f64, c: f64) -> f64 {
    let denom = a - 2.0 * b + c;
    if !(denom < 0.0) {
        return 0.0;
    }
    (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
}

/// An image rotated about its center plus the mask of pixels that map
/// back inside the source.
#[derive(Debug, Clone, PartialEq)]
pub struct RotatedImage {
    pub angle: f64,
    pub image: GrayImage,
    pub mask: Vec<bool>,
}

/// `n` angles evenly spaced over `[−π/2, π/2]` (a single angle is 0).
pub fn default_angles(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![0.0],
        _ => (0..n)
            .map(|i| -FRAC_PI_2 + core::f64::consts::PI * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Rotates content about the image center; a positive angle turns it
/// clockwise on screen, matching [`crate::geometry::rot_z`]. Pixels with
/// no source are filled with the border mean and masked out.
pub fn rotate_image(image: &GrayImage, angle: f64) -> RotatedImage {
    let (w, h) = (image.width(), image.height());
    if angle == 0.0 {
        return RotatedImage {
            angle,
            image: image.clone(),
            mask: alloc::vec![true; w * h],
        };
    }
    let (s, c) = angle.sin_cos();
    let (cx, cy) = (w as f64 * 0.5, h as f64 * 0.5);
    let fill = image.border_mean();
    let mut mask = Vec::with_capacity(w * h);
    let out = GrayImage::from_fn(w, h, |x, y| {
        let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
        // inverse rotation
        let (sx, sy) = (c * dx + s * dy + cx, -s * dx + c * dy + cy);
        let v = image.sample(sx, sy);
        mask.push(v.is_some());
        v.unwrap_or(fill)
    });
    RotatedImage {
        angle,
        image: out,
        mask,
    }
}

pub fn rotation_bank(image: &GrayImage, angles: &[f64]) -> Vec<RotatedImage> {
    angles.iter().map(|&a| rotate_image(image, a)).collect()
}
