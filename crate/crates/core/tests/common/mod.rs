#![allow(dead_code)]

use refpose_core::database::{DatabaseConfig, RawReference, ReferenceDatabase};
use refpose_core::geometry::Vec3;
use refpose_core::image::GrayImage;
use refpose_core::objectframe::ObjectFrame;
use refpose_core::synth::{make_scene, SynthConfig, SynthScene};

pub fn scene(n_ref: usize, n_query: usize) -> SynthScene {
    make_scene(&SynthConfig {
        n_ref,
        n_query,
        ..SynthConfig::default()
    })
    .unwrap()
}

pub fn database(scene: &SynthScene) -> ReferenceDatabase {
    let raw: Vec<RawReference> = scene
        .references
        .iter()
        .map(|v| RawReference {
            image: v.image.clone(),
            intrinsics: scene.intrinsics,
            pose: v.pose,
        })
        .collect();
    let frame = ObjectFrame::new(Vec3::zeros(), scene.object.diameter()).unwrap();
    ReferenceDatabase::build(&raw, frame, DatabaseConfig::default()).unwrap()
}

pub fn psnr(a: &GrayImage, b: &GrayImage, mask: Option<&[bool]>) -> f64 {
    let (mut se, mut n) = (0.0, 0usize);
    for (i, (x, y)) in a.data().iter().zip(b.data()).enumerate() {
        if mask.map_or(true, |m| m[i]) {
            se += (x - y).powi(2);
            n += 1;
        }
    }
    let mse = se / n.max(1) as f64;
    10.0 * (1.0 / mse.max(1e-20)).log10()
}
