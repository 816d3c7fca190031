//! Pinhole cameras, rigid and similarity transforms, and look-at warps.
//!
//! Poses map object coordinates into camera coordinates,
//! `x_cam = R * x_obj + t`, with the camera looking down `+z`, `x` to the
//! right and `y` down in the image.

use nalgebra::{Matrix3, Rotation3, Unit, Vector2, Vector3};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Tolerance for the orthonormality and determinant checks on rotations.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(fx.is_finite() && fy.is_finite() && cx.is_finite() && cy.is_finite()) {
            return Err(Error::InvalidIntrinsics("non-finite value"));
        }
        if fx <= 0.0 || fy <= 0.0 {
            return Err(Error::InvalidIntrinsics("focal length must be positive"));
        }
        Ok(Self { fx, fy, cx, cy })
    }

    pub fn isotropic(f: f64, cx: f64, cy: f64) -> Result<Self> {
        Self::new(f, f, cx, cy)
    }

    /// Mean focal length.
    pub fn focal(&self) -> f64 {
        0.5 * (self.fx + self.fy)
    }

    pub fn matrix(&self) -> Mat3 {
        Mat3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn inverse_matrix(&self) -> Mat3 {
        Mat3::new(
            1.0 / self.fx,
            0.0,
            -self.cx / self.fx,
            0.0,
            1.0 / self.fy,
            -self.cy / self.fy,
            0.0,
            0.0,
            1.0,
        )
    }

    /// Camera-frame ray `K⁻¹ (u, v, 1)` through a pixel, with unit `z`.
    pub fn ray(&self, pixel: &Vec2) -> Vec3 {
        Vec3::new(
            (pixel.x - self.cx) / self.fx,
            (pixel.y - self.cy) / self.fy,
            1.0,
        )
    }

    /// Projects a camera-frame point.
    pub fn project_camera(&self, p: &Vec3) -> Result<Vec2> {
        if !(p.z > 0.0) {
            return Err(Error::NonPositiveDepth(p.z));
        }
        Ok(Vec2::new(
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ))
    }
}

/// Object-to-camera rigid transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPose {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl RigidPose {
    /// Validates that `rotation` is a proper rotation.
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self> {
        let err = rotation_error(&rotation);
        if !(err <= ROTATION_TOLERANCE) || !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidRotation(err));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Projects `rotation` onto SO(3) before building the pose.
    pub fn orthonormalized(rotation: Mat3, translation: Vec3) -> Result<Self> {
        Self::new(nearest_rotation(&rotation), translation)
    }

    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self {
            rotation: Mat3::identity(),
            translation,
        }
    }

    #[inline]
    pub fn transform(&self, x: &Vec3) -> Vec3 {
        self.rotation * x + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidPose) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Camera center expressed in object coordinates.
    pub fn camera_center(&self) -> Vec3 {
        -(self.rotation.transpose() * self.translation)
    }

    /// Unit direction from the object origin toward the camera center.
    pub fn viewpoint(&self) -> Result<Vec3> {
        let c = self.camera_center();
        let n = c.norm();
        if !(n > 0.0) {
            return Err(Error::ZeroVector);
        }
        Ok(c / n)
    }
}

/// Free-function form of [`RigidPose::compose`].
pub fn compose(a: &RigidPose, b: &RigidPose) -> RigidPose {
    a.compose(b)
}

/// Free-function form of [`RigidPose::inverse`].
pub fn invert(a: &RigidPose) -> RigidPose {
    a.inverse()
}

/// Max-norm of `RᵀR − I` combined with `|det R − 1|`.
pub fn rotation_error(r: &Mat3) -> f64 {
    let ortho = (r.transpose() * r - Mat3::identity()).abs().max();
    ortho.max((r.determinant() - 1.0).abs())
}

/// Closest rotation in the Frobenius sense.
pub fn nearest_rotation(m: &Mat3) -> Mat3 {
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let d = (u * v_t).determinant().signum();
    u * Mat3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * v_t
}

/// Rotation from an axis-angle vector (angle = norm, radians).
pub fn rotation_from_axis_angle(r: &Vec3) -> Mat3 {
    Rotation3::from_scaled_axis(*r).into_inner()
}

/// Axis-angle vector of a rotation matrix.
pub fn axis_angle_from_rotation(r: &Mat3) -> Vec3 {
    Rotation3::from_matrix_unchecked(*r).scaled_axis()
}

/// Geodesic angle between two rotations, radians.
pub fn rotation_angle_between(a: &Mat3, b: &Mat3) -> f64 {
    let m = a.transpose() * b;
    let c = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    c.acos()
}

/// Rotation about the camera `z` axis. A positive angle turns image
/// content clockwise on screen (image `y` points down).
pub fn rot_z(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Minimal rotation taking `direction` onto the `+z` axis.
pub fn look_at_rotation(direction: &Vec3) -> Result<Mat3> {
    let n = direction.norm();
    if !(n > 0.0) {
        return Err(Error::ZeroVector);
    }
    let d = direction / n;
    if d.z <= -1.0 + 1e-15 {
        return Err(Error::NonPositiveDepth(direction.z));
    }
    // Rodrigues for the rotation taking d to z: axis d × z, cos = d.z.
    let axis = Vec3::new(d.y, -d.x, 0.0);
    let s = axis.norm();
    if s < 1e-300 {
        return Ok(Mat3::identity());
    }
    let angle = s.atan2(d.z);
    Ok(Rotation3::from_axis_angle(&Unit::new_unchecked(axis / s), angle).into_inner())
}

/// Projective map between pixel planes, homogeneous.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    pub matrix: Mat3,
}

impl Homography {
    pub fn new(matrix: Mat3) -> Result<Self> {
        if !(matrix.determinant().abs() > 1e-12) {
            return Err(Error::SingularHomography);
        }
        Ok(Self { matrix })
    }

    pub fn apply(&self, p: &Vec2) -> Option<Vec2> {
        let h = self.matrix * Vec3::new(p.x, p.y, 1.0);
        if h.z.abs() < 1e-300 {
            return None;
        }
        Some(Vec2::new(h.x / h.z, h.y / h.z))
    }

    pub fn inverse(&self) -> Self {
        Self {
            matrix: self.matrix.try_inverse().unwrap_or_else(Mat3::zeros),
        }
    }
}

/// Scale, in-plane offset and residual rotation, expressed in the input
/// camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityResidual {
    pub scale: f64,
    pub offset: Vec2,
    pub rotation: Mat3,
}

impl SimilarityResidual {
    pub fn new(scale: f64, offset: Vec2, rotation: Mat3) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidScale(scale));
        }
        let err = rotation_error(&rotation);
        if !(err <= ROTATION_TOLERANCE) {
            return Err(Error::InvalidRotation(err));
        }
        Ok(Self {
            scale,
            offset,
            rotation,
        })
    }

    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            offset: Vec2::zeros(),
            rotation: Mat3::identity(),
        }
    }

    /// The residual that undoes `self` when applied after it.
    pub fn inverse(&self) -> Self {
        Self {
            scale: 1.0 / self.scale,
            offset: -self.offset / self.scale,
            rotation: self.rotation.transpose(),
        }
    }
}

/// Projects an object point to pixels.
pub fn project(k: &Intrinsics, pose: &RigidPose, x: &Vec3) -> Result<Vec2> {
    k.project_camera(&pose.transform(x))
}

/// Back-projects a pixel at camera depth `z` into object coordinates.
pub fn unproject(k: &Intrinsics, pose: &RigidPose, pixel: &Vec2, z: f64) -> Result<Vec3> {
    if !(z > 0.0) {
        return Err(Error::NonPositiveDepth(z));
    }
    let p_cam = k.ray(pixel) * z;
    Ok(pose.rotation.transpose() * (p_cam - pose.translation))
}

/// Focal length of the camera rotated so that its optical axis passes
/// through `q`: the mean focal divided by the cosine of the angle between
/// the principal ray and the ray through `q`.
pub fn virtual_focal(k: &Intrinsics, q: &Vec2) -> Result<f64> {
    if !(q.x.is_finite() && q.y.is_finite()) {
        return Err(Error::InvalidIntrinsics("non-finite pixel"));
    }
    Ok(k.focal() * k.ray(q).norm())
}

/// Depth of the object center from the compact box size of the unit
/// sphere, `2 f̃ / S_q`.
pub fn depth_from_scale(virtual_focal: f64, box_size: f64) -> Result<f64> {
    if !(box_size > 0.0 && box_size.is_finite()) {
        return Err(Error::InvalidScale(box_size));
    }
    if !(virtual_focal > 0.0) {
        return Err(Error::NonPositive("virtual focal"));
    }
    Ok(2.0 * virtual_focal / box_size)
}

/// `S_q = S_r · s`.
pub fn box_size_from_scale(scale: f64, reference_size: f64) -> Result<f64> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidScale(scale));
    }
    Ok(reference_size * scale)
}

/// Result of [`look_at_warp`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LookAtWarp {
    /// Maps source pixels to warped pixels.
    pub homography: Homography,
    /// Isotropic intrinsics of the warped camera.
    pub intrinsics: Intrinsics,
    /// Pose seen by the warped camera.
    pub pose: RigidPose,
    /// Rotation from the source camera frame to the warped camera frame.
    pub rotation: Mat3,
}

/// Rotates the camera about its center so that the optical axis passes
/// through `center` (object coordinates), and picks an isotropic focal
/// length so that the silhouette of the unit sphere around `center` is the
/// circle inscribed in the `out_size × out_size` image.
pub fn look_at_warp(
    k: &Intrinsics,
    pose: &RigidPose,
    center: &Vec3,
    out_size: f64,
) -> Result<LookAtWarp> {
    let c_cam = pose.transform(center);
    if !(c_cam.z > 0.0) {
        return Err(Error::NonPositiveDepth(c_cam.z));
    }
    let dist = c_cam.norm();
    if !(dist > 1.0) {
        return Err(Error::CameraInsideSphere(dist));
    }
    let r_look = look_at_rotation(&c_cam)?;
    // Silhouette half-angle is asin(1/D); its tangent is 1/sqrt(D² − 1).
    let f = 0.5 * out_size * (dist * dist - 1.0).sqrt();
    let half = 0.5 * out_size;
    let k_out = Intrinsics::isotropic(f, half, half)?;
    let h = k_out.matrix() * r_look * k.inverse_matrix();
    Ok(LookAtWarp {
        homography: Homography::new(h)?,
        intrinsics: k_out,
        pose: RigidPose {
            rotation: r_look * pose.rotation,
            translation: r_look * pose.translation,
        },
        rotation: r_look,
    })
}

/// Converts a similarity residual into the rigid update `(R', t')` for an
/// object whose center sits at `c_cam` in the input camera frame:
/// `t' = ((c_x + t_x)/s − c_x, (c_y + t_y)/s − c_y, c_z/s − c_z)`.
pub fn similarity_to_rigid(res: &SimilarityResidual, c_cam: &Vec3) -> Result<RigidPose> {
    if !(res.scale > 0.0 && res.scale.is_finite()) {
        return Err(Error::InvalidScale(res.scale));
    }
    if !(c_cam.z > 0.0) {
        return Err(Error::NonPositiveDepth(c_cam.z));
    }
    let s = res.scale;
    let t = Vec3::new(
        (c_cam.x + res.offset.x) / s - c_cam.x,
        (c_cam.y + res.offset.y) / s - c_cam.y,
        c_cam.z / s - c_cam.z,
    );
    Ok(RigidPose {
        rotation: res.rotation,
        translation: t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use core::f64::consts::{FRAC_PI_4, SQRT_2};

    fn k100() -> Intrinsics {
        Intrinsics::isotropic(100.0, 50.0, 50.0).unwrap()
    }

    #[test]
    fn project_examples() {
        let id = RigidPose::identity();
        let p = project(&k100(), &id, &Vec3::new(0.0, 0.0, 2.0)).unwrap();
        assert_relative_eq!(p, Vec2::new(50.0, 50.0));
        let p = project(&k100(), &id, &Vec3::new(1.0, 0.0, 2.0)).unwrap();
        assert_relative_eq!(p, Vec2::new(100.0, 50.0));
        assert!(matches!(
            project(&k100(), &id, &Vec3::new(0.0, 0.0, -1.0)),
            Err(Error::NonPositiveDepth(_))
        ));
    }

    #[test]
    fn virtual_focal_examples() {
        let k = k100();
        assert_relative_eq!(virtual_focal(&k, &Vec2::new(50.0, 50.0)).unwrap(), 100.0);
        // tan 45° = 1 → offset of one focal length
        let f = virtual_focal(&k, &Vec2::new(150.0, 50.0)).unwrap();
        assert_relative_eq!(f, 100.0 * SQRT_2, epsilon = 1e-12);
        assert!(virtual_focal(&k, &Vec2::new(0.0, 0.0)).unwrap() > 100.0);
        let aniso = Intrinsics::new(90.0, 110.0, 50.0, 50.0).unwrap();
        assert_relative_eq!(virtual_focal(&aniso, &Vec2::new(50.0, 50.0)).unwrap(), 100.0);
    }

    #[test]
    fn depth_and_box_examples() {
        assert_relative_eq!(depth_from_scale(500.0, 100.0).unwrap(), 10.0);
        assert_relative_eq!(depth_from_scale(500.0, 1000.0).unwrap(), 1.0);
        assert!(matches!(depth_from_scale(500.0, 0.0), Err(Error::InvalidScale(_))));
        assert_relative_eq!(box_size_from_scale(1.0, 120.0).unwrap(), 120.0);
        assert_relative_eq!(box_size_from_scale(0.5, 120.0).unwrap(), 60.0);
        assert_relative_eq!(box_size_from_scale(2.0, 100.0).unwrap(), 200.0);
        assert!(box_size_from_scale(-1.0, 120.0).is_err());
    }

    #[test]
    fn similarity_to_rigid_examples() {
        let id = SimilarityResidual::identity();
        let d = similarity_to_rigid(&id, &Vec3::new(0.3, -0.2, 5.0)).unwrap();
        assert_relative_eq!(d.translation, Vec3::zeros());
        assert_relative_eq!(d.rotation, Mat3::identity());

        let s2 = SimilarityResidual::new(2.0, Vec2::zeros(), Mat3::identity()).unwrap();
        let d = similarity_to_rigid(&s2, &Vec3::new(0.0, 0.0, 4.0)).unwrap();
        assert_relative_eq!(d.translation, Vec3::new(0.0, 0.0, -2.0));

        let r = SimilarityResidual::new(0.5, Vec2::new(1.0, 0.0), Mat3::identity()).unwrap();
        let d = similarity_to_rigid(&r, &Vec3::new(1.0, 0.0, 2.0)).unwrap();
        assert_relative_eq!(d.translation, Vec3::new(3.0, 0.0, 2.0));

        assert!(similarity_to_rigid(&r, &Vec3::new(0.0, 0.0, -1.0)).is_err());
    }

    #[test]
    fn compose_invert_examples() {
        let p = RigidPose::new(
            rotation_from_axis_angle(&Vec3::new(0.3, -0.1, 0.7)),
            Vec3::new(1.0, 2.0, 3.0),
        )
        .unwrap();
        let id = RigidPose::identity();
        assert_relative_eq!(compose(&id, &p).rotation, p.rotation);
        assert_relative_eq!(invert(&invert(&p)).translation, p.translation, epsilon = 1e-12);
        let e = compose(&p, &invert(&p));
        assert_relative_eq!(e.rotation, Mat3::identity(), epsilon = 1e-12);
        assert_relative_eq!(e.translation, Vec3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn look_at_centered_is_pure_scaling() {
        let k = Intrinsics::isotropic(400.0, 160.0, 120.0).unwrap();
        let pose = RigidPose::from_translation(Vec3::new(0.0, 0.0, 8.0));
        let w = look_at_warp(&k, &pose, &Vec3::zeros(), 120.0).unwrap();
        assert_relative_eq!(w.rotation, Mat3::identity(), epsilon = 1e-15);
        let h = w.homography.matrix;
        assert_relative_eq!(h[(0, 1)], 0.0);
        assert_relative_eq!(h[(2, 0)], 0.0);
        assert_relative_eq!(h[(0, 0)], h[(1, 1)], epsilon = 1e-12);
    }

    #[test]
    fn look_at_rotation_maps_direction_to_axis() {
        let d = Vec3::new(0.4, -0.3, 1.0);
        let r = look_at_rotation(&d).unwrap();
        assert_relative_eq!(r * d.normalize(), Vec3::z(), epsilon = 1e-12);
        assert!(rotation_error(&r) < 1e-12);
    }

    #[test]
    fn rot_z_turns_content_clockwise() {
        // +x image axis moves toward +y (down) for positive angles
        let p = rot_z(FRAC_PI_4) * Vec3::new(1.0, 0.0, 1.0);
        assert!(p.y > 0.0);
    }

    #[test]
    fn residual_inverse_round_trip() {
        let res = SimilarityResidual::new(
            1.2,
            Vec2::new(0.1, -0.3),
            rotation_from_axis_angle(&Vec3::new(0.05, 0.02, -0.1)),
        )
        .unwrap();
        let c = Vec3::new(0.2, 0.1, 6.0);
        let d1 = similarity_to_rigid(&res, &c).unwrap();
        let c1 = c + d1.translation;
        let d2 = similarity_to_rigid(&res.inverse(), &c1).unwrap();
        assert_relative_eq!(c1 + d2.translation, c, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Intrinsics::new(0.0, 1.0, 0.0, 0.0).is_err());
        assert!(Intrinsics::new(f64::NAN, 1.0, 0.0, 0.0).is_err());
        assert!(RigidPose::new(Mat3::identity() * 2.0, Vec3::zeros()).is_err());
        let reflect = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        assert!(RigidPose::new(reflect, Vec3::zeros()).is_err());
        assert!(Homography::new(Mat3::zeros()).is_err());
        assert!(SimilarityResidual::new(0.0, Vec2::zeros(), Mat3::identity()).is_err());
    }
}
