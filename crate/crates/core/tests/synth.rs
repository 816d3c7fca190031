use refpose_core::geometry::*;
use refpose_core::synth::*;

#[test]
fn rendered_corners_match_projection() {
    let scene = make_scene(&SynthConfig { n_ref: 8, n_query: 6, ..SynthConfig::default() }).unwrap();
    let k = scene.intrinsics;
    for v in scene.references.iter().chain(&scene.queries) {
        let corners: Vec<Vec2> = scene.object.corners().iter().map(|c| project(&k, &v.pose, c).unwrap()).collect();
        // a pixel well inside the projected square shows the dark frame
        // near each corner, and the background just outside it
        let center = corners.iter().fold(Vec2::zeros(), |s, c| s + c) / 4.0;
        for c in &corners {
            let inside = c + (center - c) * 0.05;
            let outside = c - (center - c) * 0.15;
            let at = |p: Vec2| v.image.get(p.x as usize, p.y as usize);
            if v.image.contains(outside.x, outside.y) {
                assert!((at(outside) - 0.35).abs() < 0.01);
            }
            assert!(at(inside) < 0.2, "{}", at(inside));
        }
        let o = project(&k, &v.pose, &Vec3::zeros()).unwrap();
        assert!(v.image.contains(o.x, o.y));
    }
}

#[test]
fn query_at_a_reference_pose_renders_the_reference() {
    let scene = make_scene(&SynthConfig { n_ref: 8, n_query: 0, ..SynthConfig::default() }).unwrap();
    let r = &scene.references[4];
    let img = render(&scene.object, &scene.intrinsics, &r.pose, 320, 240, 0.35);
    for (a, b) in img.data().iter().zip(r.image.data()) {
        // references are stored quantized to 8 bits
        assert!((a.clamp(0.0, 1.0) - b).abs() <= 0.5 / 255.0 + 1e-12);
    }
}

#[test]
fn texture_is_deterministic_and_bounded() {
    let a = PlanarObject::random(9, 0.2);
    let b = PlanarObject::random(9, 0.2);
    assert_eq!(a, b);
    for i in 0..50 {
        for j in 0..50 {
            let t = a.texture(i as f64 / 49.0, j as f64 / 49.0);
            assert!((0.0..=1.0).contains(&t));
        }
    }
    assert!(a.albedo(0.11, 0.0).is_none());
    assert_eq!(a.model_points(5).len(), 25);
    assert!((a.diameter() - 0.2 * 2f64.sqrt()).abs() < 1e-15);
}
