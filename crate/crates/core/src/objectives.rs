//! Training objectives for the detector, selector and refiner, as plain
//! functions. Useful as oracles and for plugging in learned backends.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geometry::{RigidPose, SimilarityResidual, Vec2, Vec3};
use crate::image::GrayImage;

/// Pixels closer than this to the projected center are positives.
pub const POSITIVE_RADIUS: f64 = 1.5;

/// Probability clamp for the similarity loss.
pub const PROB_EPS: f64 = 1e-7;

/// Heat/scale predictions with their labels. Map pixel `(x, y)` sits at
/// `(x + 0.5, y + 0.5)`, the same convention as images.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledHeat {
    /// Logits.
    pub heatmap: GrayImage,
    /// Predicted log-scale per pixel.
    pub scalemap: GrayImage,
    pub c_prj: Vec2,
    pub s_gt: f64,
}

impl LabeledHeat {
    pub fn new(heatmap: GrayImage, scalemap: GrayImage, c_prj: Vec2, s_gt: f64) -> Result<Self> {
        if heatmap.width() != scalemap.width() || heatmap.height() != scalemap.height() {
            return Err(Error::DimensionMismatch("heat and scale maps"));
        }
        if !(s_gt > 0.0) {
            return Err(Error::InvalidScale(s_gt));
        }
        Ok(Self {
            heatmap,
            scalemap,
            c_prj,
            s_gt,
        })
    }

    fn is_positive(&self, x: usize, y: usize) -> bool {
        let p = Vec2::new(x as f64 + 0.5, y as f64 + 0.5);
        (p - self.c_prj).norm() < POSITIVE_RADIUS
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Summed binary cross-entropy on sigmoid(logit), with positives inside
/// [`POSITIVE_RADIUS`] of the projected center.
pub fn loss_heat(lh: &LabeledHeat) -> f64 {
    let mut total = 0.0;
    for y in 0..lh.heatmap.height() {
        for x in 0..lh.heatmap.width() {
            let h = lh.heatmap.get(x, y);
            let label = if lh.is_positive(x, y) { 1.0 } else { 0.0 };
            // −y log σ(h) − (1 − y) log(1 − σ(h)) = softplus(h) − y h
            total += softplus(h) - label * h;
        }
    }
    total
}

/// Squared log-scale error summed over the positive pixels.
pub fn loss_scale(lh: &LabeledHeat) -> f64 {
    let target = lh.s_gt.ln();
    let mut total = 0.0;
    for y in 0..lh.scalemap.height() {
        for x in 0..lh.scalemap.width() {
            if lh.is_positive(x, y) {
                let d = target - lh.scalemap.get(x, y);
                total += d * d;
            }
        }
    }
    total
}

/// `s_gt = 2 f / (l S_r)`.
pub fn gt_scale(virtual_focal: f64, distance: f64, reference_size: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::NonPositive("center distance"));
    }
    if !(reference_size > 0.0) {
        return Err(Error::NonPositive("reference size"));
    }
    Ok(2.0 * virtual_focal / (distance * reference_size))
}

/// Summed binary cross-entropy between predicted scores (clamped into
/// `(0, 1)`) and target similarities in `[0, 1]`.
pub fn loss_sim(pred: &[f64], gt: &[f64]) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: gt.len(),
        });
    }
    Ok(pred
        .iter()
        .zip(gt)
        .map(|(&p, &g)| {
            let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
            -(g * p.ln() + (1.0 - g) * (1.0 - p).ln())
        })
        .sum())
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a % (2.0 * PI);
    if r <= -PI {
        r += 2.0 * PI;
    } else if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Squared wrapped difference of two in-plane angles.
pub fn loss_angle(alpha_pred: f64, alpha_gt: f64) -> f64 {
    let d = wrap_angle(alpha_pred - alpha_gt);
    d * d
}

fn apply_similarity(res: &SimilarityResidual, p: &Vec3) -> Vec3 {
    let t = Vec3::new(res.offset.x, res.offset.y, 0.0);
    res.rotation * (p + t) * res.scale
}

/// Summed distance between points moved by the predicted and the true
/// similarity, `Σ ‖s_pr R_pr (p + t'_pr) − s_gt R_gt (p + t'_gt)‖`.
pub fn loss_ref(pred: &SimilarityResidual, gt: &SimilarityResidual, points: &[Vec3]) -> f64 {
    points
        .iter()
        .map(|p| (apply_similarity(pred, p) - apply_similarity(gt, p)).norm())
        .sum()
}

/// Coordinate of vertex `i` along one axis of the volume grid: spacing
/// `2 / resolution`, with vertex `resolution / 2` at the origin so that the
/// object center is always sampled. All vertices lie in `[−1, 1]`.
pub fn grid_coordinate(i: usize, resolution: usize) -> f64 {
    (i as f64 - (resolution / 2) as f64) * 2.0 / resolution.max(1) as f64
}

/// `resolution³` grid points over `[−1, 1]³` (see [`grid_coordinate`]),
/// moved into the camera frame of `pose`.
pub fn volume_sample_points(pose: &RigidPose, resolution: usize) -> Vec<Vec3> {
    let coord = |i: usize| grid_coordinate(i, resolution);
    let mut out = Vec::with_capacity(resolution.pow(3));
    for z in 0..resolution {
        for y in 0..resolution {
            for x in 0..resolution {
                out.push(pose.transform(&Vec3::new(coord(x), coord(y), coord(z))));
            }
        }
    }
    out
}
