//! Wireframe overlays of the normalized object cube.

use image::{Rgb, RgbImage};
use imageproc::drawing::draw_line_segment_mut;
use refpose_core::geometry::{project, Intrinsics, RigidPose, Vec2};
use refpose_core::image::GrayImage;
use refpose_core::objectframe::ObjectFrame;

use crate::dataio::cube_corners;

pub const GT_COLOR: Rgb<u8> = Rgb([0, 255, 0]);
pub const PRED_COLOR: Rgb<u8> = Rgb([0, 0, 255]);

/// Corner index pairs of the 12 cube edges.
pub fn cube_edges() -> Vec<(usize, usize)> {
    let mut edges = Vec::with_capacity(12);
    for a in 0..8usize {
        for bit in [1, 2, 4] {
            if a & bit == 0 {
                edges.push((a, a | bit));
            }
        }
    }
    edges
}

/// Projected cube corners; `None` where a corner is behind the camera.
pub fn projected_corners(k: &Intrinsics, pose: &RigidPose, frame: &ObjectFrame) -> [Option<Vec2>; 8] {
    let corners = cube_corners();
    let mut out = [None; 8];
    for (o, c) in out.iter_mut().zip(&corners) {
        *o = project(k, pose, &frame.denormalize_point(c)).ok();
    }
    out
}

/// Edges whose endpoints both project; `pose` is in raw object units.
pub fn wireframe(k: &Intrinsics, pose: &RigidPose, frame: &ObjectFrame) -> Vec<(Vec2, Vec2)> {
    let p = projected_corners(k, pose, frame);
    cube_edges()
        .into_iter()
        .filter_map(|(a, b)| Some((p[a]?, p[b]?)))
        .collect()
}

/// Pixel `(x, y)` covers `[x, x+1) × [y, y+1)`, so its center is half a
/// pixel from the integer coordinates the rasterizer works in. The
/// rasterizer truncates, so endpoints are rounded first.
pub fn draw_wireframe(img: &mut RgbImage, lines: &[(Vec2, Vec2)], color: Rgb<u8>) {
    let px = |v: &Vec2| ((v.x - 0.5).round() as f32, (v.y - 0.5).round() as f32);
    for (a, b) in lines {
        draw_line_segment_mut(img, px(a), px(b), color);
    }
}

/// The image in gray with the ground-truth cube in green and the
/// prediction in blue on top.
pub fn render_overlay(
    image: &GrayImage,
    k: &Intrinsics,
    frame: &ObjectFrame,
    pred: Option<&RigidPose>,
    gt: Option<&RigidPose>,
) -> RgbImage {
    let luma = image.to_luma8();
    let mut out = RgbImage::from_fn(image.width() as u32, image.height() as u32, |x, y| {
        let v = luma[y as usize * image.width() + x as usize];
        Rgb([v, v, v])
    });
    if let Some(p) = gt {
        draw_wireframe(&mut out, &wireframe(k, p, frame), GT_COLOR);
    }
    if let Some(p) = pred {
        draw_wireframe(&mut out, &wireframe(k, p, frame), PRED_COLOR);
    }
    out
}
