use std::path::Path;

use refpose::core::database::{DatabaseConfig, RawReference};
use refpose::core::geometry::*;
use refpose::core::image::GrayImage;
use refpose::core::synth::{make_scene, look_at_pose, SynthConfig};
use refpose::dataio::*;
use refpose::{json, Error};

fn image(seed: usize) -> GrayImage {
    GrayImage::from_fn(64, 48, |x, y| ((x * 3 + y * 5 + seed * 7) % 256) as f64 / 255.0)
}

fn two_views(meta: Meta) -> ReferenceSet {
    let k = Intrinsics::new(80.0, 82.0, 32.0, 24.0).unwrap();
    let poses = [
        look_at_pose(&Vec3::new(1.0, 0.2, 0.8), &Vec3::zeros(), &Vec3::z(), 0.0).unwrap(),
        look_at_pose(&Vec3::new(-0.7, 0.9, 0.6), &Vec3::zeros(), &Vec3::z(), 0.1).unwrap(),
    ];
    ReferenceSet {
        meta,
        ids: vec!["0000".into(), "0001".into()],
        views: poses
            .iter()
            .enumerate()
            .map(|(i, p)| RawReference { image: image(i), intrinsics: k, pose: *p })
            .collect(),
        points: None,
        keypoints: None,
    }
}

fn meta(center: Option<[f64; 3]>, diameter: Option<f64>) -> Meta {
    Meta { object: "thing".into(), center, diameter, units: "m".into() }
}

#[test]
fn two_view_set_loads_with_every_view_in_both_subsets() {
    let tmp = tempfile::tempdir().unwrap();
    write_reference_set(tmp.path(), &two_views(meta(Some([0.01, 0.0, -0.02]), Some(0.3)))).unwrap();
    let (set, db) = load_reference_set(tmp.path(), DatabaseConfig::default()).unwrap();
    assert_eq!(set.ids, vec!["0000", "0001"]);
    assert_eq!(db.len(), 2);
    let mut d = db.detector_subset.clone();
    d.sort();
    let mut s = db.selector_subset.clone();
    s.sort();
    assert_eq!(d, vec![0, 1]);
    assert_eq!(s, vec![0, 1]);
    // the frame comes from meta.json untouched
    assert_eq!(db.frame.center, Vec3::new(0.01, 0.0, -0.02));
    assert_eq!(db.frame.diameter, 0.3);
}

#[test]
fn reference_set_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let mut set = two_views(meta(None, Some(0.25)));
    set.points = Some(vec![Vec3::new(0.1, -0.1, 0.0), Vec3::new(-0.05, 0.02, 0.03)]);
    let mut kp = Keypoints::new();
    kp.insert("0000".into(), vec![Some([10.5, 20.25]), None]);
    set.keypoints = Some(kp);
    write_reference_set(tmp.path(), &set).unwrap();
    let back = read_reference_set(tmp.path()).unwrap();
    assert_eq!(back.meta, set.meta);
    assert_eq!(back.ids, set.ids);
    assert_eq!(back.points, set.points);
    assert_eq!(back.keypoints, set.keypoints);
    for (a, b) in back.views.iter().zip(&set.views) {
        assert!((a.pose.rotation - b.pose.rotation).norm() < 1e-9);
        assert!((a.pose.translation - b.pose.translation).norm() < 1e-9);
        assert_eq!(a.intrinsics, b.intrinsics);
        assert_eq!(a.image, b.image);
    }
}

#[test]
fn synthetic_fixture_is_consistent() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = make_scene(&SynthConfig { n_ref: 8, n_query: 3, ..SynthConfig::default() }).unwrap();
    let layout = write_synth(tmp.path(), &scene).unwrap();
    let set = read_reference_set(&layout.reference).unwrap();
    let kps = set.keypoints.as_ref().unwrap();
    for (id, v) in set.ids.iter().zip(&set.views) {
        for (c, px) in scene.object.corners().iter().zip(&kps[id]) {
            let px = px.unwrap();
            let p = project(&v.intrinsics, &v.pose, c).unwrap();
            assert!((p - Vec2::new(px[0], px[1])).norm() < 1e-6);
        }
    }
    // triangulated corners land on the model
    for (t, c) in set.triangulated_keypoints().unwrap().iter().zip(scene.object.corners()) {
        assert!((t - c).norm() < 1e-6, "{t:?} vs {c:?}");
    }
    let gt = read_poses(&layout.gt).unwrap();
    assert_eq!(gt.len(), 3);
    for (q, (_, pose)) in scene.queries.iter().zip(gt.values()) {
        assert!((q.pose.rotation - pose.rotation).norm() < 1e-9);
        assert!((q.pose.translation - pose.translation).norm() < 1e-9);
    }
    let queries = read_queries(&layout.queries).unwrap();
    assert_eq!(queries.len(), 3);
    assert_eq!(queries[1].image, scene.queries[1].image);
}

fn tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn synthetic_fixture_regenerates_byte_for_byte() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = SynthConfig { n_ref: 8, n_query: 2, noise: 0.02, ..SynthConfig::default() };
    write_synth(a.path(), &make_scene(&cfg).unwrap()).unwrap();
    write_synth(b.path(), &make_scene(&cfg).unwrap()).unwrap();
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    assert!(!ta.is_empty());
    assert!(ta == tb);
}

fn write_camera(dir: &Path, id: &str, value: serde_json::Value) {
    json::write(&dir.join("views").join(format!("{id}.json")), &value).unwrap();
}

#[test]
fn camera_without_pose_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    write_reference_set(tmp.path(), &two_views(meta(Some([0.0; 3]), Some(0.3)))).unwrap();
    write_camera(tmp.path(), "0001", serde_json::json!({"fx": 80.0, "fy": 80.0, "cx": 32.0, "cy": 24.0}));
    match read_reference_set(tmp.path()) {
        Err(Error::MissingPose(id)) => assert_eq!(id, "0001"),
        other => panic!("{other:?}"),
    }
    std::fs::remove_file(tmp.path().join("views/0001.json")).unwrap();
    assert!(matches!(read_reference_set(tmp.path()), Err(Error::MissingPose(_))));
}

#[test]
fn non_rotation_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    write_reference_set(tmp.path(), &two_views(meta(Some([0.0; 3]), Some(0.3)))).unwrap();
    write_camera(
        tmp.path(),
        "0000",
        serde_json::json!({"fx": 80.0, "fy": 80.0, "cx": 32.0, "cy": 24.0,
            "R": [1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0], "t": [0.0, 0.0, 1.0]}),
    );
    assert!(matches!(read_reference_set(tmp.path()), Err(Error::InvalidPose { .. })));
    write_camera(
        tmp.path(),
        "0000",
        serde_json::json!({"fx": -80.0, "fy": 80.0, "cx": 32.0, "cy": 24.0,
            "R": [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], "t": [0.0, 0.0, 1.0]}),
    );
    assert!(matches!(read_reference_set(tmp.path()), Err(Error::InconsistentIntrinsics { .. })));
}

#[test]
fn frame_is_estimated_from_points_with_margin() {
    let mut set = two_views(meta(None, None));
    let pts = vec![Vec3::new(0.1, 0.0, 0.0), Vec3::new(-0.1, 0.0, 0.0), Vec3::new(0.0, 0.05, 0.02)];
    set.points = Some(pts.clone());
    assert!((set.object_diameter().unwrap() - 0.2).abs() < 1e-12);
    for margin in [1.0, 1.05, 1.3] {
        let f = set.frame_with_margin(margin).unwrap();
        for p in &pts {
            assert!(f.normalize_point(p).norm() <= 1.0 / margin + 1e-9);
        }
        assert!(f.diameter >= 0.2 * margin - 1e-12);
    }
    // a given diameter wins over the estimate
    set.meta.diameter = Some(0.5);
    assert_eq!(set.frame().unwrap().diameter, 0.5);
    assert_eq!(set.object_diameter().unwrap(), 0.5);
}

#[test]
fn frame_without_any_size_information_fails() {
    let set = two_views(meta(None, None));
    assert!(matches!(set.frame(), Err(Error::Parse { .. })));
}

#[test]
fn margin_below_one_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    write_reference_set(tmp.path(), &two_views(meta(Some([0.0; 3]), Some(0.3)))).unwrap();
    let cfg = DatabaseConfig { frame_margin: 0.9, ..DatabaseConfig::default() };
    assert!(matches!(load_reference_set(tmp.path(), cfg), Err(Error::Config(_))));
}
