use proptest::prelude::*;
use refpose_core::evaluation::*;
use refpose_core::geometry::*;

fn pose() -> impl Strategy<Value = RigidPose> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, 0.0..3.0f64, 2.0..6.0f64).prop_map(|(x, y, z, a, d)| {
        let axis = Vec3::new(x, y, z + 2.5).normalize();
        RigidPose::new(rotation_from_axis_angle(&(axis * a)), Vec3::new(0.1, -0.05, d)).unwrap()
    })
}

fn points() -> impl Strategy<Value = Vec<Vec3>> {
    prop::collection::vec((-0.2..0.2f64, -0.2..0.2f64, -0.2..0.2f64), 1..30)
        .prop_map(|v| v.into_iter().map(|(x, y, z)| Vec3::new(x, y, z)).collect())
}

fn errors() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..0.2f64, 1..30)
}

proptest! {
    #[test]
    fn add_s_never_exceeds_add(pts in points(), a in pose(), b in pose()) {
        prop_assert!(add_s_error(&pts, &a, &b).unwrap() <= add_error(&pts, &a, &b).unwrap() + 1e-12);
    }

    #[test]
    fn metrics_ignore_a_shared_world_change(pts in points(), a in pose(), b in pose(), w in pose()) {
        // moving the world by `w` changes object poses to T ∘ w⁻¹ and the
        // model points to w(x)
        let moved: Vec<Vec3> = pts.iter().map(|p| w.transform(p)).collect();
        let (a2, b2) = (compose(&a, &invert(&w)), compose(&b, &invert(&w)));
        let k = Intrinsics::isotropic(500.0, 320.0, 240.0).unwrap();
        prop_assert!((add_error(&pts, &a, &b).unwrap() - add_error(&moved, &a2, &b2).unwrap()).abs() < 1e-9);
        prop_assert!((add_s_error(&pts, &a, &b).unwrap() - add_s_error(&moved, &a2, &b2).unwrap()).abs() < 1e-9);
        if let (Ok(p1), Ok(p2)) = (proj_error(&pts, &k, &a, &b), proj_error(&moved, &k, &a2, &b2)) {
            prop_assert!((p1 - p2).abs() < 1e-6);
        }
    }

    #[test]
    fn recall_ignores_order(e in errors(), t in 0.01..0.2f64) {
        let mut r = e.clone();
        r.reverse();
        r.rotate_left(e.len() / 2);
        prop_assert_eq!(recall_at(&e, t).unwrap(), recall_at(&r, t).unwrap());
        let count = e.iter().filter(|&&v| v < t).count() as f64 / e.len() as f64;
        prop_assert_eq!(recall_at(&e, t).unwrap(), count);
    }

    #[test]
    fn auc_never_rises_when_an_error_grows(e in errors(), i in any::<prop::sample::Index>(), bump in 0.0..0.1f64) {
        let i = i.index(e.len());
        let mut worse = e.clone();
        worse[i] += bump;
        let (a, b) = (add_auc(&e, 0.10).unwrap(), add_auc(&worse, 0.10).unwrap());
        prop_assert!(b <= a + 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn auc_equals_averaged_recall_curve(e in errors()) {
        // midpoint rule on a fine grid converges to the step integral
        let n = 20000;
        let mut area = 0.0;
        for j in 0..n {
            let t = 0.10 * (j as f64 + 0.5) / n as f64;
            area += e.iter().filter(|&&v| v < t).count() as f64 / e.len() as f64;
        }
        prop_assert!((add_auc(&e, 0.10).unwrap() - area / n as f64).abs() < 2e-4);
    }
}

#[test]
fn report_matches_manual_aggregation() {
    let rec = |id: &str, add: f64, prj: f64, vg: f64, vs: f64| EvalRecord {
        id: id.into(),
        add,
        add_s: add * 0.5,
        prj,
        view_diff_gt: vg,
        view_diff_sel: vs,
    };
    let records = vec![
        rec("a", 0.01, 1.0, 0.1, 0.2),
        rec("b", 0.03, 7.0, 0.2, 0.3),
        rec("c", 0.005, 2.0, 0.3, 0.1),
        rec("d", 0.2, 40.0, 0.4, 0.5),
        rec("e", 0.019, 4.9, 0.5, 0.4),
    ];
    let r = report(&records, &ObjectMeta { name: "obj".into(), diameter: 0.2 }).unwrap();
    assert_eq!(r.count, 5);
    // threshold 0.02: a, c, e
    assert!((r.add_01d - 0.6).abs() < 1e-12);
    // add_s halves: 0.005 0.015 0.0025 0.1 0.0095 → four below 0.02
    assert!((r.add_s_01d - 0.8).abs() < 1e-12);
    assert!((r.prj5 - 0.6).abs() < 1e-12);
    let auc = ((0.1 - 0.01) + (0.1 - 0.03) + (0.1 - 0.005) + 0.0 + (0.1 - 0.019)) / (0.1 * 5.0);
    assert!((r.add_auc - auc).abs() < 1e-12);
    assert!((r.mean_add - 0.264 / 5.0).abs() < 1e-12);
    assert!((r.median_add - 0.019).abs() < 1e-12);
    assert!((r.mean_prj - 54.9 / 5.0).abs() < 1e-12);
    assert!((r.median_view_diff_gt - 0.3).abs() < 1e-12);
    assert!(report(&[], &ObjectMeta { name: "obj".into(), diameter: 0.2 }).is_err());
}
