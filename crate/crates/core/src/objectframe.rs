//! Object coordinate normalization.
//!
//! The normalized frame puts the object center at the origin and scales
//! coordinates so that the object fits in the unit sphere:
//! `x_norm = 2 (x − c) / d`.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geometry::{look_at_warp, Intrinsics, LookAtWarp, RigidPose, Vec3};
use crate::image::GrayImage;
use crate::sampling::farthest_point_sampling;

/// Above this many points the diameter is computed on an FPS subsample.
pub const EXACT_DIAMETER_LIMIT: usize = 2000;
/// Size of the FPS subsample used for large clouds.
pub const DIAMETER_SUBSAMPLE: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectFrame {
    pub center: Vec3,
    pub diameter: f64,
}

impl ObjectFrame {
    pub fn new(center: Vec3, diameter: f64) -> Result<Self> {
        if !(diameter > 0.0 && diameter.is_finite()) || !center.iter().all(|v| v.is_finite()) {
            return Err(Error::NonPositive("object diameter"));
        }
        Ok(Self { center, diameter })
    }

    /// Identity normalization: center at the origin, diameter 2.
    pub fn unit() -> Self {
        Self {
            center: Vec3::zeros(),
            diameter: 2.0,
        }
    }

    pub fn normalize_point(&self, x: &Vec3) -> Vec3 {
        (x - self.center) / self.diameter * 2.0
    }

    pub fn denormalize_point(&self, x_norm: &Vec3) -> Vec3 {
        x_norm * (self.diameter * 0.5) + self.center
    }

    /// Re-expresses a raw object-to-camera pose in the normalized frame.
    /// The camera frame is scaled along with the object, so projections
    /// are unchanged: `t_norm = (R c + t) · 2 / d`.
    pub fn normalize_pose(&self, pose: &RigidPose) -> RigidPose {
        RigidPose {
            rotation: pose.rotation,
            translation: (pose.rotation * self.center + pose.translation) * (2.0 / self.diameter),
        }
    }

    pub fn denormalize_pose(&self, pose: &RigidPose) -> RigidPose {
        RigidPose {
            rotation: pose.rotation,
            translation: pose.translation * (self.diameter * 0.5) - pose.rotation * self.center,
        }
    }

    /// Grows the diameter so that every point lies inside the sphere, then
    /// applies the multiplicative `margin`.
    pub fn enclosing(&self, points: &[Vec3], margin: f64) -> Self {
        let r_max = points
            .iter()
            .map(|p| (p - self.center).norm())
            .fold(0.0, f64::max);
        Self {
            center: self.center,
            diameter: self.diameter.max(2.0 * r_max) * margin,
        }
    }
}

/// Center = centroid, diameter = largest pairwise distance (exact up to
/// [`EXACT_DIAMETER_LIMIT`] points, otherwise over an FPS subsample).
pub fn estimate_frame(points: &[Vec3]) -> Result<ObjectFrame> {
    if points.len() < 2 {
        return Err(Error::DegenerateCloud);
    }
    let center = points.iter().fold(Vec3::zeros(), |acc, p| acc + p) / points.len() as f64;
    let subset: Vec<Vec3> = if points.len() > EXACT_DIAMETER_LIMIT {
        farthest_point_sampling(points.len(), DIAMETER_SUBSAMPLE, |i, j| {
            (points[i] - points[j]).norm()
        })
        .into_iter()
        .map(|i| points[i])
        .collect()
    } else {
        points.to_vec()
    };
    let mut diameter = 0.0f64;
    for (i, a) in subset.iter().enumerate() {
        for b in &subset[i + 1..] {
            diameter = diameter.max((a - b).norm());
        }
    }
    if !(diameter > 0.0) {
        return Err(Error::DegenerateCloud);
    }
    ObjectFrame::new(center, diameter)
}

/// A reference image warped to look at the normalized object.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceView {
    pub image: GrayImage,
    /// Pixels that came from inside the raw image.
    pub mask: Vec<bool>,
    pub intrinsics: Intrinsics,
    /// Normalized-object to camera pose of the warped camera.
    pub pose: RigidPose,
    /// Unit direction from the object center to the camera center.
    pub viewpoint: Vec3,
    pub inplane_id: Option<usize>,
}

/// Warps `image` so that the optical axis passes through the origin of
/// `pose`'s object frame and the unit sphere around it is inscribed in a
/// `size × size` image. Returns the warped image, its validity mask and
/// the warp.
pub fn look_at_crop(
    image: &GrayImage,
    intrinsics: &Intrinsics,
    pose: &RigidPose,
    size: usize,
) -> Result<(GrayImage, Vec<bool>, LookAtWarp)> {
    let warp = look_at_warp(intrinsics, pose, &Vec3::zeros(), size as f64)?;
    let (warped, mask) = image.warp(&warp.homography.matrix, size, size)?;
    Ok((warped, mask, warp))
}

/// Warps a raw reference image so that its optical axis passes through
/// the object center and the unit sphere's silhouette is inscribed in a
/// `size × size` image.
pub fn normalize_reference(
    image: &GrayImage,
    intrinsics: &Intrinsics,
    pose_raw: &RigidPose,
    frame: &ObjectFrame,
    size: usize,
) -> Result<ReferenceView> {
    if image.is_empty() {
        return Err(Error::ImageTooSmall {
            width: image.width(),
            height: image.height(),
        });
    }
    let pose = frame.normalize_pose(pose_raw);
    let (warped, mask, warp) = look_at_crop(image, intrinsics, &pose, size)?;
    Ok(ReferenceView {
        image: warped,
        mask,
        intrinsics: warp.intrinsics,
        pose: warp.pose,
        viewpoint: warp.pose.viewpoint()?,
        inplane_id: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{project, rotation_from_axis_angle, Vec2};
    use approx::assert_relative_eq;

    #[test]
    fn cube_corners() {
        let pts: Vec<Vec3> = (0..8)
            .map(|i| Vec3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64))
            .collect();
        let f = estimate_frame(&pts).unwrap();
        assert_relative_eq!(f.center, Vec3::new(0.5, 0.5, 0.5), epsilon = 1e-15);
        assert_relative_eq!(f.diameter, 3f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn two_points() {
        let f = estimate_frame(&[Vec3::zeros(), Vec3::new(0.0, 0.0, 2.0)]).unwrap();
        assert_relative_eq!(f.center, Vec3::new(0.0, 0.0, 1.0));
        assert_relative_eq!(f.diameter, 2.0);
    }

    #[test]
    fn degenerate_cloud() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(estimate_frame(&[p, p, p]), Err(Error::DegenerateCloud));
        assert_eq!(estimate_frame(&[p]), Err(Error::DegenerateCloud));
    }

    #[test]
    fn normalize_point_examples() {
        let f = ObjectFrame::new(Vec3::new(1.0, 2.0, 3.0), 2.0).unwrap();
        assert_relative_eq!(f.normalize_point(&f.center), Vec3::zeros());
        assert_relative_eq!(
            f.normalize_point(&Vec3::new(2.0, 2.0, 3.0)),
            Vec3::new(1.0, 0.0, 0.0)
        );
    }

    #[test]
    fn unit_frame_leaves_pose_unchanged() {
        let pose = RigidPose::new(
            rotation_from_axis_angle(&Vec3::new(0.1, 0.2, 0.3)),
            Vec3::new(0.1, 0.2, 5.0),
        )
        .unwrap();
        assert_eq!(ObjectFrame::unit().normalize_pose(&pose), pose);
    }

    #[test]
    fn normalized_pose_preserves_projection() {
        let k = Intrinsics::isotropic(500.0, 160.0, 120.0).unwrap();
        let frame = ObjectFrame::new(Vec3::new(0.3, -0.2, 0.1), 0.4).unwrap();
        let pose = RigidPose::new(
            rotation_from_axis_angle(&Vec3::new(0.4, -0.2, 0.1)),
            Vec3::new(0.05, 0.02, 1.5),
        )
        .unwrap();
        let pn = frame.normalize_pose(&pose);
        for x in [Vec3::new(0.3, -0.2, 0.1), Vec3::new(0.4, -0.1, 0.0)] {
            let a = project(&k, &pose, &x).unwrap();
            let b = project(&k, &pn, &frame.normalize_point(&x)).unwrap();
            assert_relative_eq!(a, b, epsilon = 1e-9);
        }
        let back = frame.denormalize_pose(&pn);
        assert_relative_eq!(back.translation, pose.translation, epsilon = 1e-12);
    }

    #[test]
    fn enclosing_contains_points() {
        let mut pts = alloc::vec![Vec3::zeros(); 20];
        pts.push(Vec3::new(1.0, 0.0, 0.0));
        let f = estimate_frame(&pts).unwrap().enclosing(&pts, 1.0);
        for p in &pts {
            assert!(f.normalize_point(p).norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn reference_center_projects_to_middle() {
        let k = Intrinsics::isotropic(500.0, 160.0, 120.0).unwrap();
        let img = GrayImage::filled(320, 240, 0.5);
        let pose = RigidPose::new(
            rotation_from_axis_angle(&Vec3::new(0.1, 0.3, 0.0)),
            Vec3::new(0.1, -0.05, 1.2),
        )
        .unwrap();
        let frame = ObjectFrame::new(Vec3::zeros(), 0.3).unwrap();
        let v = normalize_reference(&img, &k, &pose, &frame, 120).unwrap();
        let c = project(&v.intrinsics, &v.pose, &Vec3::zeros()).unwrap();
        assert_relative_eq!(c, Vec2::new(60.0, 60.0), epsilon = 1e-9);
        assert_relative_eq!(v.viewpoint.norm(), 1.0, epsilon = 1e-12);
        assert_eq!(v.image.width(), 120);
    }
}
