//! Two-view triangulation and similarity alignment of point sets, used to
//! register reference sequences captured separately.

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geometry::{Intrinsics, Mat3, RigidPose, Vec2, Vec3};

/// Rays closer to parallel than this are rejected.
pub const MIN_RAY_ANGLE_DEG: f64 = 0.1;

/// Midpoint of the common perpendicular of the two viewing rays.
pub fn triangulate(
    kp_a: &Vec2,
    pose_a: &RigidPose,
    k_a: &Intrinsics,
    kp_b: &Vec2,
    pose_b: &RigidPose,
    k_b: &Intrinsics,
) -> Result<Vec3> {
    let ca = pose_a.camera_center();
    let cb = pose_b.camera_center();
    if (ca - cb).norm() <= 1e-12 * (1.0 + ca.norm()) {
        return Err(Error::DegenerateRays);
    }
    let da = (pose_a.rotation.transpose() * k_a.ray(kp_a)).normalize();
    let db = (pose_b.rotation.transpose() * k_b.ray(kp_b)).normalize();
    let b = da.dot(&db);
    let denom = 1.0 - b * b;
    let min_sin = MIN_RAY_ANGLE_DEG.to_radians().sin();
    if denom <= min_sin * min_sin {
        return Err(Error::DegenerateRays);
    }
    let w0 = ca - cb;
    let d = da.dot(&w0);
    let e = db.dot(&w0);
    let s = (b * e - d) / denom;
    let t = (e - b * d) / denom;
    Ok(((ca + da * s) + (cb + db * t)) * 0.5)
}

/// Similarity transform taking sequence-B coordinates into sequence-A
/// coordinates: `a ≈ scale · R · b + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceAlignment {
    pub scale: f64,
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl SequenceAlignment {
    pub fn apply(&self, b: &Vec3) -> Vec3 {
        self.rotation * b * self.scale + self.translation
    }

    /// Root-mean-square residual over correspondences.
    pub fn rms_residual(&self, points_a: &[Vec3], points_b: &[Vec3]) -> f64 {
        let n = points_a.len().min(points_b.len());
        if n == 0 {
            return 0.0;
        }
        let ss: f64 = points_a
            .iter()
            .zip(points_b)
            .map(|(a, b)| (a - self.apply(b)).norm_squared())
            .sum();
        (ss / n as f64).sqrt()
    }
}

/// Least-squares similarity between corresponding point sets (centroids,
/// SVD of the cross-covariance with reflection correction, scale from the
/// variance ratio).
pub fn align_sequences(points_a: &[Vec3], points_b: &[Vec3]) -> Result<SequenceAlignment> {
    if points_a.len() != points_b.len() {
        return Err(Error::LengthMismatch {
            left: points_a.len(),
            right: points_b.len(),
        });
    }
    let n = points_a.len();
    if n < 3 {
        return Err(Error::Collinear);
    }
    let nf = n as f64;
    let mu_a = points_a.iter().fold(Vec3::zeros(), |s, p| s + p) / nf;
    let mu_b = points_b.iter().fold(Vec3::zeros(), |s, p| s + p) / nf;
    let mut cov = Mat3::zeros();
    let mut var_b = 0.0;
    let mut cov_bb = Mat3::zeros();
    for (a, b) in points_a.iter().zip(points_b) {
        let (da, db) = (a - mu_a, b - mu_b);
        cov += da * db.transpose();
        cov_bb += db * db.transpose();
        var_b += db.norm_squared();
    }
    cov /= nf;
    var_b /= nf;
    // rank check on the source cloud itself
    let sv_b = cov_bb.singular_values();
    let mut s_sorted = [sv_b[0], sv_b[1], sv_b[2]];
    s_sorted.sort_by(|x, y| y.total_cmp(x));
    if !(var_b > 0.0) || s_sorted[1] <= 1e-12 * s_sorted[0] {
        return Err(Error::Collinear);
    }
    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let d = svd.singular_values;
    let sign = if (u.determinant() * v_t.determinant()) < 0.0 {
        -1.0
    } else {
        1.0
    };
    let s_mat = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, sign));
    let rotation = u * s_mat * v_t;
    let scale = (d[0] + d[1] + sign * d[2]) / var_b;
    let translation = mu_a - rotation * mu_b * scale;
    Ok(SequenceAlignment {
        scale,
        rotation,
        translation,
    })
}
