//! Viewpoint selection and in-plane rotation.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::correlation::{default_angles, masked_ncc, parabolic_offset, rotate_image};
use crate::database::ReferenceDatabase;
use crate::error::{Error, Result};
use crate::geometry::{rot_z, Intrinsics, LookAtWarp, Mat3, RigidPose, Vec3};
use crate::image::GrayImage;
use crate::objectframe::{look_at_crop, ReferenceView};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectorConfig {
    /// In-plane rotations in the bank, spread over `[−90°, 90°]`.
    pub n_angles: usize,
    /// Restrict correlation to the disc inscribed in the crop.
    pub disc_mask: bool,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        Self {
            n_angles: 5,
            disc_mask: true,
        }
    }
}

/// Scores of every (reference, angle) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewpointScores {
    /// Database index of each row.
    pub refs: Vec<usize>,
    pub angles: Vec<f64>,
    /// Row-major `refs.len() × angles.len()`.
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    /// Set when the raw scores had (numerically) zero variance.
    pub flat: bool,
    pub best_ref: usize,
    pub best_angle: usize,
}

impl ViewpointScores {
    pub fn raw_at(&self, r: usize, a: usize) -> f64 {
        self.raw[r * self.angles.len() + a]
    }

    pub fn normalized_at(&self, r: usize, a: usize) -> f64 {
        self.normalized[r * self.angles.len() + a]
    }

    /// Builds scores from a raw table: global normalization and argmax.
    pub fn from_raw(refs: Vec<usize>, angles: Vec<f64>, raw: Vec<f64>) -> Result<Self> {
        if raw.len() != refs.len() * angles.len() || raw.is_empty() {
            return Err(Error::LengthMismatch {
                left: raw.len(),
                right: refs.len() * angles.len(),
            });
        }
        let n = raw.len() as f64;
        let mean = raw.iter().sum::<f64>() / n;
        let var = raw.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let flat = var < 1e-12;
        let normalized = if flat {
            alloc::vec![0.0; raw.len()]
        } else {
            let sd = var.sqrt();
            raw.iter().map(|v| (v - mean) / sd).collect()
        };
        // ties: lowest row, then lowest angle
        let mut best = 0;
        for (i, &v) in raw.iter().enumerate() {
            if v > raw[best] {
                best = i;
            }
        }
        let na = angles.len();
        Ok(Self {
            refs,
            angles,
            best_ref: best / na,
            best_angle: best % na,
            raw,
            normalized,
            flat,
        })
    }
}

fn disc(size: usize) -> Vec<bool> {
    let c = 0.5 * size as f64;
    let mut out = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let (dx, dy) = (x as f64 + 0.5 - c, y as f64 + 0.5 - c);
            out.push(dx * dx + dy * dy <= c * c);
        }
    }
    out
}

/// Masked NCC of the query crop against each reference rotated by each
/// angle. Flat pairs score 0.
pub fn score_views(
    query_crop: &GrayImage,
    query_mask: &[bool],
    views: &[(usize, &ReferenceView)],
    angles: &[f64],
    cfg: &SelectorConfig,
) -> Result<ViewpointScores> {
    if views.is_empty() || angles.is_empty() {
        return Err(Error::EmptyList);
    }
    let size = query_crop.width();
    let disc = if cfg.disc_mask {
        disc(size)
    } else {
        alloc::vec![true; size * size]
    };
    let qmask: Vec<bool> = query_mask.iter().zip(&disc).map(|(&a, &b)| a && b).collect();
    let mut raw = Vec::with_capacity(views.len() * angles.len());
    for (_, view) in views {
        if view.image.width() != size || view.image.height() != query_crop.height() {
            return Err(Error::DimensionMismatch("selector crops"));
        }
        let valid = GrayImage::from_fn(size, size, |x, y| {
            if view.mask[y * size + x] {
                1.0
            } else {
                0.0
            }
        });
        for &a in angles {
            let rot = rotate_image(&view.image, a);
            let rmask = rotate_image(&valid, a);
            let mask: Vec<bool> = rot
                .mask
                .iter()
                .zip(rmask.image.data())
                .map(|(&m, &v)| m && v > 0.999)
                .collect();
            raw.push(masked_ncc(query_crop, Some(&qmask), &rot.image, Some(&mask)).unwrap_or(0.0));
        }
    }
    ViewpointScores::from_raw(
        views.iter().map(|(i, _)| *i).collect(),
        angles.to_vec(),
        raw,
    )
}

/// Best row and in-plane angle. The angle is refined parabolically over
/// the neighboring bank entries when both exist.
pub fn select(scores: &ViewpointScores) -> (usize, f64) {
    let (r, a) = (scores.best_ref, scores.best_angle);
    let na = scores.angles.len();
    let mut alpha = scores.angles[a];
    if !scores.flat && a > 0 && a + 1 < na {
        let step = scores.angles[a + 1] - scores.angles[a];
        let d = parabolic_offset(
            scores.normalized_at(r, a - 1),
            scores.normalized_at(r, a),
            scores.normalized_at(r, a + 1),
        );
        alpha += d * step;
    }
    let lo = scores.angles[0].min(scores.angles[na - 1]);
    let hi = scores.angles[0].max(scores.angles[na - 1]);
    (r, alpha.clamp(lo, hi))
}

/// `R_z(α) · R_ref`.
pub fn initial_rotation(ref_pose: &RigidPose, alpha: f64) -> Mat3 {
    rot_z(alpha) * ref_pose.rotation
}

fn unit(v: &Vec3) -> Result<Vec3> {
    let n = v.norm();
    if !(n > 0.0) {
        return Err(Error::ZeroVector);
    }
    Ok(v / n)
}

/// `(ũ·ṽ + 1) / 2`.
pub fn gt_view_similarity(u: &Vec3, v: &Vec3) -> Result<f64> {
    let d = unit(u)?.dot(&unit(v)?).clamp(-1.0, 1.0);
    Ok(0.5 * (d + 1.0))
}

/// `arccos(ũ·ṽ)`, radians.
pub fn viewpoint_angle(u: &Vec3, v: &Vec3) -> Result<f64> {
    let (u, v) = (unit(u)?, unit(v)?);
    Ok(u.cross(&v).norm().atan2(u.dot(&v)))
}

/// Output of [`select_view`].
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Database index of the chosen reference.
    pub view: usize,
    pub alpha: f64,
    /// Initial rotation in the query camera frame.
    pub rotation: Mat3,
    pub scores: ViewpointScores,
    pub warp: LookAtWarp,
}

/// Warps the query around the detected center, scores it against the
/// selector subset and turns the winner into a rotation in the query
/// camera frame.
pub fn select_view(
    query: &GrayImage,
    k: &Intrinsics,
    t_init: &Vec3,
    db: &ReferenceDatabase,
    cfg: &SelectorConfig,
) -> Result<Selection> {
    if cfg.n_angles == 0 {
        return Err(Error::InvalidConfig("selector needs at least one angle"));
    }
    let (crop, mask, warp) = look_at_crop(
        query,
        k,
        &RigidPose::from_translation(*t_init),
        db.config.view_size,
    )?;
    let views: Vec<(usize, &ReferenceView)> =
        db.selector_subset.iter().map(|&i| (i, &db.views[i])).collect();
    let scores = score_views(&crop, &mask, &views, &default_angles(cfg.n_angles), cfg)?;
    let (row, alpha) = select(&scores);
    let view = scores.refs[row];
    let r_virtual = initial_rotation(&db.views[view].pose, alpha);
    Ok(Selection {
        view,
        alpha,
        rotation: warp.rotation.transpose() * r_virtual,
        scores,
        warp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn similarity_examples() {
        let u = Vec3::new(0.0, 0.0, 2.0);
        assert_eq!(gt_view_similarity(&u, &u).unwrap(), 1.0);
        assert_eq!(gt_view_similarity(&u, &-u).unwrap(), 0.0);
        assert_eq!(gt_view_similarity(&u, &Vec3::x()).unwrap(), 0.5);
        assert_eq!(gt_view_similarity(&u, &Vec3::zeros()), Err(Error::ZeroVector));
    }

    #[test]
    fn angle_examples() {
        let u = Vec3::new(1.0, 1.0, 0.0);
        assert_eq!(viewpoint_angle(&u, &u).unwrap(), 0.0);
        assert!((viewpoint_angle(&u, &Vec3::new(1.0, -1.0, 0.0)).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!((viewpoint_angle(&u, &-u).unwrap() - PI).abs() < 1e-15);
    }

    #[test]
    fn select_tie_rule_and_single_entry() {
        let s = ViewpointScores::from_raw(alloc::vec![7], alloc::vec![0.0], alloc::vec![0.3]).unwrap();
        assert_eq!(select(&s), (0, 0.0));
        let s = ViewpointScores::from_raw(
            alloc::vec![0, 1],
            default_angles(3),
            alloc::vec![0.5; 6],
        )
        .unwrap();
        assert!(s.flat);
        assert_eq!((s.best_ref, s.best_angle), (0, 0));
    }

    #[test]
    fn normalization_is_standard() {
        let raw: Vec<f64> = (0..15).map(|i| ((i * 7) % 11) as f64 * 0.1 - 0.2).collect();
        let s = ViewpointScores::from_raw((0..3).collect(), default_angles(5), raw).unwrap();
        let n = s.normalized.len() as f64;
        let m = s.normalized.iter().sum::<f64>() / n;
        let v = s.normalized.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
        assert!(m.abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_round_trip() {
        let p = RigidPose::identity();
        let r = initial_rotation(&p, 0.3);
        let back = rot_z(-0.3) * r;
        assert!((back - p.rotation).abs().max() < 1e-15);
        assert_eq!(initial_rotation(&p, 0.0), p.rotation);
    }
}
