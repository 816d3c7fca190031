//! Pose error metrics and per-object aggregation.

use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geometry::{project, Intrinsics, RigidPose, Vec3};

/// Projection recall threshold, pixels.
pub const PRJ_THRESHOLD_PX: f64 = 5.0;
/// Upper integration limit of ADD-AUC, in object units (meters).
pub const AUC_MAX_THRESHOLD: f64 = 0.10;
/// ADD recall threshold as a fraction of the object diameter.
pub const ADD_DIAMETER_FRACTION: f64 = 0.1;

/// Mean distance between model points moved by the two poses.
pub fn add_error(points: &[Vec3], pose_gt: &RigidPose, pose_pred: &RigidPose) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyModel);
    }
    let sum: f64 = points
        .iter()
        .map(|x| (pose_gt.transform(x) - pose_pred.transform(x)).norm())
        .sum();
    Ok(sum / points.len() as f64)
}

/// Mean over ground-truth-posed points of the distance to the nearest
/// prediction-posed point.
pub fn add_s_error(points: &[Vec3], pose_gt: &RigidPose, pose_pred: &RigidPose) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyModel);
    }
    let pred: Vec<Vec3> = points.iter().map(|x| pose_pred.transform(x)).collect();
    let sum: f64 = points
        .iter()
        .map(|x| {
            let g = pose_gt.transform(x);
            pred.iter()
                .map(|p| (g - p).norm_squared())
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .sum();
    Ok(sum / points.len() as f64)
}

/// Mean pixel distance between the projections under both poses.
pub fn proj_error(
    points: &[Vec3],
    k: &Intrinsics,
    pose_gt: &RigidPose,
    pose_pred: &RigidPose,
) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyModel);
    }
    let mut sum = 0.0;
    for x in points {
        let a = project(k, pose_gt, x)?;
        let b = project(k, pose_pred, x)?;
        sum += (a - b).norm();
    }
    Ok(sum / points.len() as f64)
}

/// Fraction of errors strictly below `threshold`.
pub fn recall_at(errors: &[f64], threshold: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::EmptyList);
    }
    if !(threshold > 0.0) {
        return Err(Error::NonPositive("recall threshold"));
    }
    let hits = errors.iter().filter(|&&e| e < threshold).count();
    Ok(hits as f64 / errors.len() as f64)
}

/// Recall at 10% of the object diameter.
pub fn add_01d(errors: &[f64], diameter: f64) -> Result<f64> {
    recall_at(errors, ADD_DIAMETER_FRACTION * diameter)
}

/// Recall at [`PRJ_THRESHOLD_PX`].
pub fn prj5(errors: &[f64]) -> Result<f64> {
    recall_at(errors, PRJ_THRESHOLD_PX)
}

/// Normalized area under the recall curve on `[0, max_threshold]`.
///
/// Recall is a step function of the threshold, so each error `e`
/// contributes `max(0, τ − e) / τ` exactly.
pub fn add_auc(errors: &[f64], max_threshold: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::EmptyList);
    }
    if !(max_threshold > 0.0) {
        return Err(Error::NonPositive("AUC threshold"));
    }
    let area: f64 = errors
        .iter()
        .map(|&e| (max_threshold - e.max(0.0)).max(0.0))
        .sum();
    Ok(area / (max_threshold * errors.len() as f64))
}

/// Metrics for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub id: String,
    pub add: f64,
    pub add_s: f64,
    pub prj: f64,
    /// Angle between the query viewpoint and its nearest reference.
    pub view_diff_gt: f64,
    /// Angle between the query viewpoint and the selected reference.
    pub view_diff_sel: f64,
}

/// Object-level information the report needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectMeta {
    pub name: String,
    pub diameter: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub object: String,
    pub diameter: f64,
    pub count: usize,
    pub add_01d: f64,
    pub add_s_01d: f64,
    pub add_auc: f64,
    pub prj5: f64,
    pub mean_add: f64,
    pub median_add: f64,
    pub mean_prj: f64,
    pub mean_view_diff_gt: f64,
    pub median_view_diff_gt: f64,
    pub mean_view_diff_sel: f64,
    pub median_view_diff_sel: f64,
    /// Sorted by id.
    pub records: Vec<EvalRecord>,
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Median; even-length inputs average the middle pair.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Aggregates per-query records. The result does not depend on the order
/// of `records`.
pub fn report(records: &[EvalRecord], meta: &ObjectMeta) -> Result<EvalReport> {
    if records.is_empty() {
        return Err(Error::EmptyList);
    }
    let mut records = records.to_vec();
    records.sort_by(|a, b| a.id.cmp(&b.id));
    let col = |f: fn(&EvalRecord) -> f64| records.iter().map(f).collect::<Vec<f64>>();
    let add = col(|r| r.add);
    let add_s = col(|r| r.add_s);
    let prj = col(|r| r.prj);
    let vgt = col(|r| r.view_diff_gt);
    let vsel = col(|r| r.view_diff_sel);
    Ok(EvalReport {
        object: meta.name.clone(),
        diameter: meta.diameter,
        count: records.len(),
        add_01d: add_01d(&add, meta.diameter)?,
        add_s_01d: add_01d(&add_s, meta.diameter)?,
        add_auc: add_auc(&add, AUC_MAX_THRESHOLD)?,
        prj5: prj5(&prj)?,
        mean_add: mean(&add),
        median_add: median(&add),
        mean_prj: mean(&prj),
        mean_view_diff_gt: mean(&vgt),
        median_view_diff_gt: median(&vgt),
        mean_view_diff_sel: mean(&vsel),
        median_view_diff_sel: median(&vsel),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rotation_from_axis_angle;
    use alloc::string::ToString;

    fn pose(r: [f64; 3], t: [f64; 3]) -> RigidPose {
        RigidPose::new(rotation_from_axis_angle(&Vec3::from(r)), Vec3::from(t)).unwrap()
    }

    fn ring(n: usize) -> Vec<Vec3> {
        (0..n)
            .map(|i| {
                let a = 2.0 * core::f64::consts::PI * i as f64 / n as f64;
                Vec3::new(a.cos(), a.sin(), 0.0)
            })
            .collect()
    }

    #[test]
    fn add_examples() {
        let pts = ring(10);
        let p = pose([0.1, 0.2, 0.3], [0.0, 0.0, 2.0]);
        assert_eq!(add_error(&pts, &p, &p).unwrap(), 0.0);
        let mut q = p;
        q.translation.z += 0.25;
        assert!((add_error(&pts, &p, &q).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(add_error(&[], &p, &q), Err(Error::EmptyModel));
    }

    #[test]
    fn add_s_handles_symmetric_ring() {
        let pts = ring(360);
        let p = pose([0.0, 0.0, 0.0], [0.0, 0.0, 3.0]);
        // rotate about the ring axis by a non-multiple of the spacing
        let q = pose([0.0, 0.0, 0.3], [0.0, 0.0, 3.0]);
        let chord = 2.0 * (core::f64::consts::PI / 360.0).sin();
        assert!(add_s_error(&pts, &p, &q).unwrap() <= chord);
        assert!(add_error(&pts, &p, &q).unwrap() > 0.25);
        assert_eq!(add_s_error(&pts, &p, &p).unwrap(), 0.0);
    }

    #[test]
    fn recall_examples() {
        assert_eq!(recall_at(&[0.0, 0.0], 1.0).unwrap(), 1.0);
        assert_eq!(recall_at(&[1.0, 3.0], 2.0).unwrap(), 0.5);
        assert_eq!(recall_at(&[], 2.0), Err(Error::EmptyList));
        assert_eq!(add_01d(&[0.05, 0.2], 1.0).unwrap(), 0.5);
    }

    #[test]
    fn auc_examples() {
        assert_eq!(add_auc(&[0.0, 0.0], 0.1).unwrap(), 1.0);
        assert_eq!(add_auc(&[0.2, 0.11], 0.1).unwrap(), 0.0);
        assert!((add_auc(&[0.05], 0.1).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn proj_error_zero_for_identical_poses() {
        let k = Intrinsics::isotropic(500.0, 160.0, 120.0).unwrap();
        let p = pose([0.1, 0.0, 0.0], [0.0, 0.0, 4.0]);
        assert_eq!(proj_error(&ring(8), &k, &p, &p).unwrap(), 0.0);
    }

    #[test]
    fn report_single_perfect_record() {
        let r = EvalRecord {
            id: "0000".to_string(),
            add: 0.0,
            add_s: 0.0,
            prj: 0.0,
            view_diff_gt: 0.0,
            view_diff_sel: 0.0,
        };
        let meta = ObjectMeta {
            name: "obj".to_string(),
            diameter: 0.2,
        };
        let rep = report(&[r], &meta).unwrap();
        assert_eq!((rep.add_01d, rep.add_auc, rep.prj5), (1.0, 1.0, 1.0));
        assert_eq!(report(&[], &meta), Err(Error::EmptyList));
    }
}
