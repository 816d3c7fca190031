use std::f64::consts::PI;

use proptest::prelude::*;
use refpose_core::geometry::*;
use refpose_core::image::GrayImage;
use refpose_core::objectives::*;

fn residual() -> impl Strategy<Value = SimilarityResidual> {
    (0.7..1.4f64, -0.3..0.3f64, -0.3..0.3f64, -0.3..0.3f64, -0.3..0.3f64, -0.3..0.3f64).prop_map(
        |(s, tx, ty, a, b, c)| {
            SimilarityResidual::new(s, Vec2::new(tx, ty), rotation_from_axis_angle(&Vec3::new(a, b, c)))
                .unwrap()
        },
    )
}

fn heat_case() -> impl Strategy<Value = LabeledHeat> {
    (
        prop::collection::vec(-6.0..6.0f64, 64),
        prop::collection::vec(-1.0..1.0f64, 64),
        0.0..8.0f64,
        0.0..8.0f64,
        0.2..4.0f64,
    )
        .prop_map(|(h, s, cx, cy, sg)| {
            LabeledHeat::new(
                GrayImage::from_vec(8, 8, h).unwrap(),
                GrayImage::from_vec(8, 8, s).unwrap(),
                Vec2::new(cx, cy),
                sg,
            )
            .unwrap()
        })
}

fn positive(lh: &LabeledHeat, x: usize, y: usize) -> bool {
    let dx = x as f64 + 0.5 - lh.c_prj.x;
    let dy = y as f64 + 0.5 - lh.c_prj.y;
    (dx * dx + dy * dy).sqrt() < 1.5
}

proptest! {
    #[test]
    fn heat_and_scale_losses_match_loops(lh in heat_case()) {
        let (mut heat, mut scale) = (0.0, 0.0);
        for y in 0..8 {
            for x in 0..8 {
                let p = 1.0 / (1.0 + (-lh.heatmap.get(x, y)).exp());
                if positive(&lh, x, y) {
                    heat -= p.ln();
                    scale += (lh.s_gt.ln() - lh.scalemap.get(x, y)).powi(2);
                } else {
                    heat -= (1.0 - p).ln();
                }
            }
        }
        prop_assert!((loss_heat(&lh) - heat).abs() < 1e-9 * heat.max(1.0));
        prop_assert!((loss_scale(&lh) - scale).abs() < 1e-9 * scale.max(1.0));
        prop_assert!(loss_heat(&lh) >= 0.0 && loss_scale(&lh) >= 0.0);
    }

    #[test]
    fn scale_loss_vanishes_at_truth(mut lh in heat_case()) {
        lh.scalemap = GrayImage::filled(8, 8, lh.s_gt.ln());
        prop_assert!(loss_scale(&lh) < 1e-24);
    }

    #[test]
    fn sim_loss_is_minimized_by_the_target(gt in prop::collection::vec(0.0..=1.0f64, 1..6)) {
        let at_gt = loss_sim(&gt, &gt).unwrap();
        prop_assert!(at_gt >= 0.0);
        // sweep each coordinate over a grid
        for i in 0..gt.len() {
            for k in 0..=20 {
                let mut p = gt.clone();
                p[i] = k as f64 / 20.0;
                prop_assert!(loss_sim(&p, &gt).unwrap() >= at_gt - 1e-9);
            }
        }
    }

    #[test]
    fn angle_loss_matches_unwrapped_for_small_differences(a in -PI..PI, d in -3.0..3.0f64) {
        prop_assert!((loss_angle(a + d, a) - d * d).abs() < 1e-9);
        prop_assert!((loss_angle(a + d + 2.0 * PI, a) - d * d).abs() < 1e-9);
    }

    #[test]
    fn ref_loss_matches_loop_and_ignores_order(pred in residual(), gt in residual()) {
        let pts = volume_sample_points(&RigidPose::from_translation(Vec3::new(0.0, 0.0, 4.0)), 4);
        let mut want = 0.0;
        for p in &pts {
            let a = pred.rotation * Vec3::new(p.x + pred.offset.x, p.y + pred.offset.y, p.z) * pred.scale;
            let b = gt.rotation * Vec3::new(p.x + gt.offset.x, p.y + gt.offset.y, p.z) * gt.scale;
            want += (a - b).norm();
        }
        prop_assert!((loss_ref(&pred, &gt, &pts) - want).abs() < 1e-9 * want.max(1.0));
        let mut rev = pts.clone();
        rev.reverse();
        prop_assert!((loss_ref(&pred, &gt, &rev) - want).abs() < 1e-9 * want.max(1.0));
        prop_assert_eq!(loss_ref(&gt, &gt, &pts), 0.0);
    }

    #[test]
    fn gt_scale_reproduces_box_size(f in 100.0..2000.0f64, l in 0.5..50.0f64, sr in 32.0..256.0f64) {
        let s = gt_scale(f, l, sr).unwrap();
        prop_assert!((box_size_from_scale(s, sr).unwrap() - 2.0 * f / l).abs() < 1e-9 * (2.0 * f / l));
    }
}

#[test]
fn angle_loss_wraps_across_pi() {
    assert!((loss_angle(PI - 0.1, -PI + 0.1) - 0.04).abs() < 1e-12);
    assert!((loss_angle(0.0, PI / 2.0) - (PI / 2.0).powi(2)).abs() < 1e-12);
}

#[test]
fn single_point_pure_scale() {
    let s = SimilarityResidual::new(1.7, Vec2::zeros(), Mat3::identity()).unwrap();
    let l = loss_ref(&s, &SimilarityResidual::identity(), &[Vec3::x()]);
    assert!((l - 0.7).abs() < 1e-12);
}
