//! Volume-based pose refinement.
//!
//! Each iteration warps the query around the current pose, unprojects the
//! nearest reference views into a grid over the normalized object cube,
//! and searches for the similarity residual that makes the query agree
//! with the reference statistics. Residuals are converted to rigid updates
//! at the current object center.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::database::ReferenceDatabase;
use crate::error::{Error, Result};
use crate::geometry::{
    rotation_from_axis_angle, similarity_to_rigid, Intrinsics, Mat3, RigidPose,
    SimilarityResidual, Vec2, Vec3,
};
use crate::image::GrayImage;
use crate::objectframe::{look_at_crop, ReferenceView};
use crate::objectives::grid_coordinate;
use crate::selection::viewpoint_angle;

/// Weight regularizer in `w = 1 / (var + ε)`.
pub const VARIANCE_EPS: f64 = 1e-3;
/// Smallest fraction of valid vertices a volume may have.
pub const MIN_VALID_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefinerConfig {
    pub n_neighbors: usize,
    pub iterations: usize,
    /// Vertices per axis.
    pub resolution: usize,
    /// Side of the query crop; matches the reference views.
    pub crop_size: usize,
    pub max_rot_deg: f64,
    pub scale_range: (f64, f64),
    /// Bound on each in-plane offset component, normalized object units.
    pub offset_range: f64,
    /// Objective evaluations per iteration.
    pub budget: usize,
    /// Initial pattern-search steps: log-scale, offset, rotation (degrees).
    pub step_log_scale: f64,
    pub step_offset: f64,
    pub step_rot_deg: f64,
    /// The search stops once steps shrink by this factor.
    pub min_step_ratio: f64,
    /// Gaussian feature blur per iteration; the last entry repeats.
    pub blur_schedule: Vec<f64>,
    /// Fraction of valid vertices, lowest variance first, that enter the
    /// objective.
    pub keep_fraction: f64,
    /// Cauchy scale on the weighted residual; 0 keeps the plain sum of
    /// squares.
    pub robust_scale: f64,
}

impl Default for RefinerConfig {
    fn default() -> Self {
        Self {
            n_neighbors: 6,
            iterations: 3,
            resolution: 32,
            crop_size: 128,
            max_rot_deg: 15.0,
            scale_range: (0.8, 1.25),
            offset_range: 0.3,
            budget: 400,
            step_log_scale: 0.04,
            step_offset: 0.04,
            step_rot_deg: 4.0,
            min_step_ratio: 1.0 / 64.0,
            blur_schedule: alloc::vec![2.0, 1.0],
            keep_fraction: 0.3,
            robust_scale: 0.5,
        }
    }
}

impl RefinerConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.scale_range;
        if !(lo > 0.0 && lo <= 1.0 && hi >= 1.0 && hi.is_finite()) {
            return Err(Error::InvalidConfig("refiner scale range"));
        }
        if !(self.max_rot_deg > 0.0 && self.offset_range > 0.0) {
            return Err(Error::InvalidConfig("refiner ranges must be positive"));
        }
        if self.n_neighbors == 0 || self.resolution < 2 || self.crop_size == 0 {
            return Err(Error::InvalidConfig("refiner sizes"));
        }
        if !(self.step_log_scale > 0.0 && self.step_offset > 0.0 && self.step_rot_deg > 0.0) {
            return Err(Error::InvalidConfig("refiner steps must be positive"));
        }
        if !(self.min_step_ratio > 0.0 && self.min_step_ratio < 1.0) {
            return Err(Error::InvalidConfig("refiner min step ratio"));
        }
        if !(self.keep_fraction > 0.0 && self.keep_fraction <= 1.0) {
            return Err(Error::InvalidConfig("refiner keep fraction"));
        }
        if !(self.robust_scale >= 0.0 && self.robust_scale.is_finite()) {
            return Err(Error::InvalidConfig("refiner robust scale"));
        }
        if self.blur_schedule.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::InvalidConfig("refiner blur schedule"));
        }
        Ok(())
    }

    fn blur(&self, iteration: usize) -> f64 {
        match self.blur_schedule.len() {
            0 => 0.0,
            n => self.blur_schedule[iteration.min(n - 1)],
        }
    }
}

/// The `n` views whose viewpoints are closest to that of `pose`; ties go
/// to the lower index.
pub fn select_neighbors(pose: &RigidPose, views: &[ReferenceView], n: usize) -> Result<Vec<usize>> {
    if views.len() < n {
        return Err(Error::TooFewReferences {
            needed: n,
            available: views.len(),
        });
    }
    let vp = pose.viewpoint()?;
    let mut order: Vec<(f64, usize)> = views
        .iter()
        .enumerate()
        .map(|(i, v)| Ok((viewpoint_angle(&vp, &v.viewpoint)?, i)))
        .collect::<Result<_>>()?;
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(order.into_iter().take(n).map(|(_, i)| i).collect())
}

/// A view's features with the camera that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureView<'a> {
    pub features: &'a GrayImage,
    pub mask: Option<&'a [bool]>,
    pub intrinsics: &'a Intrinsics,
    pub pose: &'a RigidPose,
}

fn sample_view(v: &FeatureView, p: &Vec3) -> Option<f64> {
    let c = v.pose.transform(p);
    if !(c.z > 0.0) {
        return None;
    }
    let u = v.intrinsics.fx * c.x / c.z + v.intrinsics.cx;
    let w = v.intrinsics.fy * c.y / c.z + v.intrinsics.cy;
    let value = v.features.sample(u, w)?;
    if let Some(mask) = v.mask {
        let (x, y) = (u.floor() as usize, w.floor() as usize);
        let (x, y) = (
            x.min(v.features.width() - 1),
            y.min(v.features.height() - 1),
        );
        if !mask[y * v.features.width() + x] {
            return None;
        }
    }
    Some(value)
}

/// Reference statistics and query features on a grid over `[−1, 1]³`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVolume {
    pub resolution: usize,
    /// Vertex positions, x fastest.
    pub points: Vec<Vec3>,
    pub ref_mean: Vec<f64>,
    pub ref_var: Vec<f64>,
    /// Query features sampled through the input pose.
    pub query: Vec<f64>,
    pub valid: Vec<bool>,
}

impl FeatureVolume {
    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Invalidates all but the `fraction` of valid vertices with the
    /// smallest reference variance.
    pub fn keep_lowest_variance(&mut self, fraction: f64) {
        let mut vars: Vec<f64> = (0..self.valid.len())
            .filter(|&i| self.valid[i])
            .map(|i| self.ref_var[i])
            .collect();
        if vars.is_empty() || fraction >= 1.0 {
            return;
        }
        let keep = ((vars.len() as f64 * fraction).ceil() as usize).clamp(1, vars.len());
        vars.sort_by(|a, b| a.total_cmp(b));
        let cut = vars[keep - 1];
        for i in 0..self.valid.len() {
            if self.ref_var[i] > cut {
                self.valid[i] = false;
            }
        }
    }

    pub fn valid_fraction(&self) -> f64 {
        self.valid_count() as f64 / self.valid.len().max(1) as f64
    }
}

/// Samples every neighbor at every vertex and the query through
/// `query.pose`. A vertex is valid only if every projection lands inside
/// its image.
pub fn build_volume(
    neighbors: &[FeatureView],
    query: &FeatureView,
    resolution: usize,
) -> Result<FeatureVolume> {
    if neighbors.is_empty() {
        return Err(Error::TooFewReferences {
            needed: 1,
            available: 0,
        });
    }
    if resolution < 2 {
        return Err(Error::InvalidConfig("volume resolution"));
    }
    let n = resolution.pow(3);
    let nv = neighbors.len() as f64;
    let mut points = Vec::with_capacity(n);
    let mut ref_mean = Vec::with_capacity(n);
    let mut ref_var = Vec::with_capacity(n);
    let mut qf = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    for z in 0..resolution {
        for y in 0..resolution {
            for x in 0..resolution {
                let p = Vec3::new(
                    grid_coordinate(x, resolution),
                    grid_coordinate(y, resolution),
                    grid_coordinate(z, resolution),
                );
                let (mut s, mut ss, mut ok) = (0.0, 0.0, true);
                for v in neighbors {
                    match sample_view(v, &p) {
                        Some(f) => {
                            s += f;
                            ss += f * f;
                        }
                        None => {
                            ok = false;
                            break;
                        }
                    }
                }
                let q = sample_view(query, &p);
                ok &= q.is_some();
                let mean = if ok { s / nv } else { 0.0 };
                let var = if ok { (ss / nv - mean * mean).max(0.0) } else { 0.0 };
                points.push(p);
                ref_mean.push(mean);
                ref_var.push(var);
                qf.push(q.unwrap_or(0.0));
                valid.push(ok);
            }
        }
    }
    Ok(FeatureVolume {
        resolution,
        points,
        ref_mean,
        ref_var,
        query: qf,
        valid,
    })
}

/// Rigid pose after applying `res` at the object center `pose_in.t`:
/// `R = R_res R_in`, `t = t_in + t'`.
pub fn apply_residual(pose_in: &RigidPose, res: &SimilarityResidual) -> Result<RigidPose> {
    let upd = similarity_to_rigid(res, &pose_in.translation)?;
    Ok(RigidPose {
        rotation: res.rotation * pose_in.rotation,
        translation: pose_in.translation + upd.translation,
    })
}

/// Search coordinates: log-scale, offset x/y, axis-angle rotation.
pub type ResidualParams = [f64; 6];

pub fn residual_from_params(p: &ResidualParams) -> SimilarityResidual {
    SimilarityResidual {
        scale: p[0].exp(),
        offset: Vec2::new(p[1], p[2]),
        rotation: rotation_from_axis_angle(&Vec3::new(p[3], p[4], p[5])),
    }
}

/// Variance-weighted squared difference between the query, re-sampled
/// through residually moved poses, and the reference means.
pub struct ResidualObjective<'a> {
    points: Vec<(Vec3, f64, f64)>,
    query: &'a GrayImage,
    intrinsics: &'a Intrinsics,
    pose: RigidPose,
    robust_scale: f64,
}

impl<'a> ResidualObjective<'a> {
    pub fn new(
        vol: &FeatureVolume,
        query: &'a GrayImage,
        intrinsics: &'a Intrinsics,
        pose: RigidPose,
    ) -> Result<Self> {
        let valid = vol.valid_count();
        if (valid as f64) < MIN_VALID_FRACTION * vol.valid.len() as f64 || valid == 0 {
            return Err(Error::EmptyVolume {
                valid,
                total: vol.valid.len(),
            });
        }
        let points = (0..vol.points.len())
            .filter(|&i| vol.valid[i])
            .map(|i| (vol.points[i], vol.ref_mean[i], 1.0 / (vol.ref_var[i] + VARIANCE_EPS)))
            .collect();
        Ok(Self {
            points,
            query,
            intrinsics,
            pose,
            robust_scale: 0.0,
        })
    }

    /// Objective of the pose itself.
    pub fn eval_pose(&self, pose: &RigidPose) -> f64 {
        let k = self.intrinsics;
        let mut total = 0.0;
        for (p, mean, w) in &self.points {
            let c = pose.transform(p);
            let q = if c.z > 0.0 {
                self.query
                    .sample_clamped(k.fx * c.x / c.z + k.cx, k.fy * c.y / c.z + k.cy)
            } else {
                0.0
            };
            let d = q - mean;
            let r = w * d * d;
            total += if self.robust_scale > 0.0 {
                let c2 = self.robust_scale * self.robust_scale;
                c2 * (r / c2).ln_1p()
            } else {
                r
            };
        }
        total
    }

    pub fn with_robust_scale(mut self, c: f64) -> Self {
        self.robust_scale = c;
        self
    }

    pub fn eval(&self, res: &SimilarityResidual) -> Result<f64> {
        Ok(self.eval_pose(&apply_residual(&self.pose, res)?))
    }
}

/// Outcome of [`solve_residual`].
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSolution {
    pub residual: SimilarityResidual,
    pub params: ResidualParams,
    pub objective_initial: f64,
    pub objective: f64,
    pub evaluations: usize,
}

fn feasible(p: &ResidualParams, cfg: &RefinerConfig) -> bool {
    let (lo, hi) = cfg.scale_range;
    p[0] >= lo.ln() - 1e-12
        && p[0] <= hi.ln() + 1e-12
        && p[1].abs() <= cfg.offset_range
        && p[2].abs() <= cfg.offset_range
        && Vec3::new(p[3], p[4], p[5]).norm() <= cfg.max_rot_deg.to_radians() + 1e-12
}

/// Compass pattern search from the identity residual: try each coordinate
/// in both directions, accept the first improvement, halve all steps when
/// none improves. The incumbent is never replaced by a worse point.
pub fn solve_residual(obj: &ResidualObjective, cfg: &RefinerConfig) -> Result<ResidualSolution> {
    cfg.validate()?;
    let mut x: ResidualParams = [0.0; 6];
    let f0 = obj.eval(&residual_from_params(&x))?;
    let mut f = f0;
    let init = [
        cfg.step_log_scale,
        cfg.step_offset,
        cfg.step_offset,
        cfg.step_rot_deg.to_radians(),
        cfg.step_rot_deg.to_radians(),
        cfg.step_rot_deg.to_radians(),
    ];
    let mut step = init;
    let mut evals = 1;
    'search: while evals < cfg.budget {
        let mut improved = false;
        for d in 0..6 {
            for sign in [1.0, -1.0] {
                let mut cand = x;
                cand[d] += sign * step[d];
                if !feasible(&cand, cfg) {
                    continue;
                }
                let fc = obj.eval(&residual_from_params(&cand))?;
                evals += 1;
                if fc < f {
                    x = cand;
                    f = fc;
                    improved = true;
                    break;
                }
                if evals >= cfg.budget {
                    break 'search;
                }
            }
        }
        if !improved {
            for s in &mut step {
                *s *= 0.5;
            }
            if step[0] < init[0] * cfg.min_step_ratio {
                break;
            }
        }
    }
    Ok(ResidualSolution {
        residual: residual_from_params(&x),
        params: x,
        objective_initial: f0,
        objective: f,
        evaluations: evals,
    })
}

/// Per-iteration record of [`refine`].
#[derive(Debug, Clone, PartialEq)]
pub struct IterationDiagnostics {
    pub neighbors: Vec<usize>,
    pub valid_fraction: f64,
    pub objective_initial: f64,
    pub objective: f64,
    pub evaluations: usize,
    pub residual_scale: f64,
    pub residual_offset: Vec2,
    /// Angle of the residual rotation, radians.
    pub residual_angle: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub pose: RigidPose,
    /// Pose after each completed iteration.
    pub history: Vec<RigidPose>,
    pub iterations: Vec<IterationDiagnostics>,
    /// Set when an iteration could not run; `pose` is the last good one.
    pub warning: Option<Error>,
}

fn one_iteration(
    pose: &RigidPose,
    db: &ReferenceDatabase,
    query: &GrayImage,
    k: &Intrinsics,
    cfg: &RefinerConfig,
    iteration: usize,
) -> Result<(RigidPose, IterationDiagnostics)> {
    let (crop, mask, warp) = look_at_crop(query, k, pose, cfg.crop_size)?;
    let neighbors = select_neighbors(pose, &db.views, cfg.n_neighbors.min(db.views.len()))?;
    let sigma = cfg.blur(iteration);
    let blur = |img: &GrayImage| {
        if sigma > 0.0 {
            img.gaussian_blur(sigma)
        } else {
            img.clone()
        }
    };
    let ref_features: Vec<GrayImage> = neighbors.iter().map(|&i| blur(&db.views[i].image)).collect();
    let query_features = blur(&crop);
    let views: Vec<FeatureView> = neighbors
        .iter()
        .zip(&ref_features)
        .map(|(&i, f)| FeatureView {
            features: f,
            mask: Some(&db.views[i].mask),
            intrinsics: &db.views[i].intrinsics,
            pose: &db.views[i].pose,
        })
        .collect();
    let qview = FeatureView {
        features: &query_features,
        mask: Some(&mask),
        intrinsics: &warp.intrinsics,
        pose: &warp.pose,
    };
    let mut vol = build_volume(&views, &qview, cfg.resolution)?;
    vol.keep_lowest_variance(cfg.keep_fraction);
    let obj = ResidualObjective::new(&vol, &query_features, &warp.intrinsics, warp.pose)?
        .with_robust_scale(cfg.robust_scale);
    let sol = solve_residual(&obj, cfg)?;
    let moved = apply_residual(&warp.pose, &sol.residual)?;
    let back: Mat3 = warp.rotation.transpose();
    let out = RigidPose {
        rotation: back * moved.rotation,
        translation: back * moved.translation,
    };
    let diag = IterationDiagnostics {
        neighbors,
        valid_fraction: vol.valid_fraction(),
        objective_initial: sol.objective_initial,
        objective: sol.objective,
        evaluations: sol.evaluations,
        residual_scale: sol.residual.scale,
        residual_offset: sol.residual.offset,
        residual_angle: Vec3::new(sol.params[3], sol.params[4], sol.params[5]).norm(),
    };
    Ok((out, diag))
}

/// Runs `cfg.iterations` rounds of neighbor selection, volume building,
/// residual search and rigid update. `pose_init` maps normalized object
/// coordinates into the query camera.
pub fn refine(
    pose_init: &RigidPose,
    db: &ReferenceDatabase,
    query: &GrayImage,
    k: &Intrinsics,
    cfg: &RefinerConfig,
) -> Result<Refinement> {
    cfg.validate()?;
    let mut pose = *pose_init;
    let mut history = Vec::with_capacity(cfg.iterations);
    let mut iterations = Vec::with_capacity(cfg.iterations);
    let mut warning = None;
    for it in 0..cfg.iterations {
        match one_iteration(&pose, db, query, k, cfg, it) {
            Ok((p, d)) => {
                pose = p;
                history.push(p);
                iterations.push(d);
            }
            Err(e @ (Error::EmptyVolume { .. }
            | Error::CameraInsideSphere(_)
            | Error::NonPositiveDepth(_))) => {
                warning = Some(e);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Refinement {
        pose,
        history,
        iterations,
        warning,
    })
}
