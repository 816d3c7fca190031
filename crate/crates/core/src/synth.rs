//! Synthetic scenes: a textured planar square rendered from known poses.
//! Ground truth is exact, which makes these scenes usable as oracles for
//! every stage of the pipeline.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{rot_z, Intrinsics, Mat3, RigidPose, Vec3};
use crate::image::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Blob {
    u: f64,
    v: f64,
    inv_two_sigma2: f64,
    amp: f64,
}

/// A square of side `side` in the object `z = 0` plane, centered at the
/// origin, carrying a smooth random texture and a dark frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarObject {
    pub side: f64,
    blobs: Vec<Blob>,
}

const BASE_ALBEDO: f64 = 0.55;
const FRAME_WIDTH: f64 = 0.04;
const FRAME_ALBEDO: f64 = 0.08;

impl PlanarObject {
    pub fn random(seed: u64, side: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blobs = (0..28)
            .map(|_| {
                let sigma: f64 = rng.gen_range(0.03..0.10);
                Blob {
                    u: rng.gen_range(0.05..0.95),
                    v: rng.gen_range(0.05..0.95),
                    inv_two_sigma2: 0.5 / (sigma * sigma),
                    amp: rng.gen_range(-0.35..0.35),
                }
            })
            .collect();
        Self { side, blobs }
    }

    /// Albedo at texture coordinates in `[0, 1]²`.
    pub fn texture(&self, u: f64, v: f64) -> f64 {
        if u < FRAME_WIDTH || v < FRAME_WIDTH || u > 1.0 - FRAME_WIDTH || v > 1.0 - FRAME_WIDTH {
            return FRAME_ALBEDO;
        }
        let mut a = BASE_ALBEDO;
        for b in &self.blobs {
            let d2 = (u - b.u) * (u - b.u) + (v - b.v) * (v - b.v);
            a += b.amp * (-d2 * b.inv_two_sigma2).exp();
        }
        a.clamp(0.15, 0.95)
    }

    /// Albedo at object-plane point `(x, y)`, `None` off the square.
    pub fn albedo(&self, x: f64, y: f64) -> Option<f64> {
        let h = 0.5 * self.side;
        if x.abs() > h || y.abs() > h {
            return None;
        }
        Some(self.texture((x + h) / self.side, (y + h) / self.side))
    }

    pub fn corners(&self) -> [Vec3; 4] {
        let h = 0.5 * self.side;
        [
            Vec3::new(-h, -h, 0.0),
            Vec3::new(h, -h, 0.0),
            Vec3::new(h, h, 0.0),
            Vec3::new(-h, h, 0.0),
        ]
    }

    /// `n × n` grid over the square, corners included.
    pub fn model_points(&self, n: usize) -> Vec<Vec3> {
        let n = n.max(2);
        let h = 0.5 * self.side;
        let mut out = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                let x = -h + self.side * i as f64 / (n - 1) as f64;
                let y = -h + self.side * j as f64 / (n - 1) as f64;
                out.push(Vec3::new(x, y, 0.0));
            }
        }
        out
    }

    /// Largest extent of the square.
    pub fn diameter(&self) -> f64 {
        self.side * core::f64::consts::SQRT_2
    }
}

/// Renders `object` with a constant `background`, averaging a 2×2
/// supersampling pattern per pixel.
pub fn render(
    object: &PlanarObject,
    k: &Intrinsics,
    pose: &RigidPose,
    width: usize,
    height: usize,
    background: f64,
) -> GrayImage {
    let r = &pose.rotation;
    let m = Mat3::from_columns(&[r.column(0).into(), r.column(1).into(), pose.translation]);
    let h = k.matrix() * m;
    let Some(h_inv) = h.try_inverse() else {
        return GrayImage::filled(width, height, background);
    };
    const OFFSETS: [f64; 2] = [0.25, 0.75];
    GrayImage::from_fn(width, height, |x, y| {
        let mut acc = 0.0;
        for dy in OFFSETS {
            for dx in OFFSETS {
                let p = h_inv * Vec3::new(x as f64 + dx, y as f64 + dy, 1.0);
                let v = if p.z > 0.0 {
                    object.albedo(p.x / p.z, p.y / p.z).unwrap_or(background)
                } else {
                    background
                };
                acc += v;
            }
        }
        acc * 0.25
    })
}

/// Camera at `eye` looking at `target`, image up roughly along `up`,
/// then rolled by `roll` about the optical axis.
pub fn look_at_pose(eye: &Vec3, target: &Vec3, up: &Vec3, roll: f64) -> Result<RigidPose> {
    let z = target - eye;
    if !(z.norm() > 0.0) {
        return Err(Error::ZeroVector);
    }
    let z = z.normalize();
    let x = z.cross(up);
    if !(x.norm() > 1e-9) {
        return Err(Error::ZeroVector);
    }
    let x = x.normalize();
    let y = z.cross(&x);
    let r = rot_z(roll) * Mat3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
    RigidPose::orthonormalized(r, -(r * eye))
}

fn spherical(azimuth: f64, elevation: f64, distance: f64) -> Vec3 {
    let (se, ce) = elevation.sin_cos();
    let (sa, ca) = azimuth.sin_cos();
    Vec3::new(ce * ca, ce * sa, se) * distance
}

/// Scene parameters. Angles are in degrees, lengths in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_ref: usize,
    pub n_query: usize,
    /// Standard deviation of additive Gaussian noise on query images.
    pub noise: f64,
    pub width: usize,
    pub height: usize,
    pub focal: f64,
    pub side: f64,
    pub background: f64,
    pub ref_elevation: (f64, f64),
    pub ref_distance: (f64, f64),
    pub query_elevation: (f64, f64),
    pub query_distance: (f64, f64),
    pub query_roll: f64,
    pub query_target_jitter: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_ref: 32,
            n_query: 24,
            noise: 0.0,
            width: 320,
            height: 240,
            focal: 500.0,
            side: 0.2,
            background: 0.35,
            ref_elevation: (30.0, 75.0),
            ref_distance: (1.1, 1.3),
            query_elevation: (35.0, 70.0),
            query_distance: (0.95, 1.45),
            query_roll: 30.0,
            query_target_jitter: 0.04,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthView {
    pub image: GrayImage,
    pub pose: RigidPose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthScene {
    pub object: PlanarObject,
    pub intrinsics: Intrinsics,
    pub references: Vec<SynthView>,
    pub queries: Vec<SynthView>,
}

fn quantize(img: &mut GrayImage) {
    for v in img.data_mut() {
        *v = (v.clamp(0.0, 1.0) * 255.0).round() / 255.0;
    }
}

/// Reference cameras spiral over the elevation band (uniform in
/// `sin(elevation)`, golden-angle azimuth steps); queries are drawn at
/// random. Images are quantized to 8 bits so that a scene written to disk
/// reads back identically.
pub fn make_scene(cfg: &SynthConfig) -> Result<SynthScene> {
    if cfg.n_ref < 8 {
        return Err(Error::TooFewReferences {
            needed: 8,
            available: cfg.n_ref,
        });
    }
    let k = Intrinsics::isotropic(cfg.focal, 0.5 * cfg.width as f64, 0.5 * cfg.height as f64)?;
    let object = PlanarObject::random(cfg.seed, cfg.side);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_5ce7e);
    let up = Vec3::z();
    let golden = PI * (3.0 - 5f64.sqrt());
    let (z0, z1) = (
        cfg.ref_elevation.0.to_radians().sin(),
        cfg.ref_elevation.1.to_radians().sin(),
    );
    let mut references = Vec::with_capacity(cfg.n_ref);
    for i in 0..cfg.n_ref {
        let z = z0 + (z1 - z0) * (i as f64 + 0.5) / cfg.n_ref as f64;
        let az = golden * i as f64 + rng.gen_range(-0.05..0.05);
        let dist = rng.gen_range(cfg.ref_distance.0..=cfg.ref_distance.1);
        let eye = spherical(az, z.asin(), dist);
        let target = Vec3::new(rng.gen_range(-0.005..0.005), rng.gen_range(-0.005..0.005), 0.0);
        let roll = rng.gen_range(-3f64..3.0).to_radians();
        let pose = look_at_pose(&eye, &target, &up, roll)?;
        let mut image = render(&object, &k, &pose, cfg.width, cfg.height, cfg.background);
        quantize(&mut image);
        references.push(SynthView { image, pose });
    }
    let noise = if cfg.noise > 0.0 {
        Some(Normal::new(0.0, cfg.noise).map_err(|_| Error::InvalidConfig("noise level"))?)
    } else {
        None
    };
    let (q0, q1) = (
        cfg.query_elevation.0.to_radians().sin(),
        cfg.query_elevation.1.to_radians().sin(),
    );
    let mut queries = Vec::with_capacity(cfg.n_query);
    for _ in 0..cfg.n_query {
        let el = rng.gen_range(q0..=q1).asin();
        let az = rng.gen_range(0.0..2.0 * PI);
        let dist = rng.gen_range(cfg.query_distance.0..=cfg.query_distance.1);
        let j = cfg.query_target_jitter;
        let target = Vec3::new(
            rng.gen_range(-j..=j),
            rng.gen_range(-j..=j),
            rng.gen_range(-0.5 * j..=0.5 * j),
        );
        let eye = target + spherical(az, el, dist);
        let roll = rng.gen_range(-cfg.query_roll..=cfg.query_roll).to_radians();
        let pose = look_at_pose(&eye, &target, &up, roll)?;
        let mut image = render(&object, &k, &pose, cfg.width, cfg.height, cfg.background);
        if let Some(n) = &noise {
            for v in image.data_mut() {
                *v += n.sample(&mut rng);
            }
        }
        quantize(&mut image);
        queries.push(SynthView { image, pose });
    }
    Ok(SynthScene {
        object,
        intrinsics: k,
        references,
        queries,
    })
}
