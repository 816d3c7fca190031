//! Reference sets, query sets and pose files on disk.
//!
//! A reference set directory holds `meta.json`, `views/NNNN.png` with a
//! camera file `views/NNNN.json` each, and optionally `points.json` (model
//! points) and `keypoints.json` (labeled pixels per view).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use refpose_core::database::{DatabaseConfig, RawReference, ReferenceDatabase};
use refpose_core::geometry::{project, Intrinsics, Mat3, RigidPose, Vec2, Vec3};
use refpose_core::image::GrayImage;
use refpose_core::multiview::triangulate;
use refpose_core::objectframe::{estimate_frame, ObjectFrame};
use refpose_core::synth::SynthScene;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::json;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub object: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diameter: Option<f64>,
    #[serde(default = "default_units")]
    pub units: String,
}

fn default_units() -> String {
    "m".into()
}

/// Contents of a camera file. `R` is world-to-camera, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraFile {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<[f64; 9]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<[f64; 3]>,
}

impl CameraFile {
    pub fn new(k: &Intrinsics, pose: Option<&RigidPose>) -> Self {
        Self {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            rotation: pose.map(|p| rotation_to_array(&p.rotation)),
            t: pose.map(|p| [p.translation.x, p.translation.y, p.translation.z]),
        }
    }

    pub fn intrinsics(&self, id: &str) -> Result<Intrinsics> {
        Intrinsics::new(self.fx, self.fy, self.cx, self.cy).map_err(|source| {
            Error::InconsistentIntrinsics {
                id: id.into(),
                source,
            }
        })
    }

    pub fn pose(&self, id: &str) -> Result<RigidPose> {
        let (Some(r), Some(t)) = (self.rotation, self.t) else {
            return Err(Error::MissingPose(id.into()));
        };
        pose_from_arrays(&r, &t).map_err(|source| Error::InvalidPose {
            id: id.into(),
            source,
        })
    }
}

pub fn rotation_to_array(r: &Mat3) -> [f64; 9] {
    let mut out = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            out[3 * i + j] = r[(i, j)];
        }
    }
    out
}

pub fn pose_from_arrays(r: &[f64; 9], t: &[f64; 3]) -> refpose_core::Result<RigidPose> {
    RigidPose::new(Mat3::from_row_slice(r), Vec3::from(*t))
}

/// `{"R": [...], "t": [...]}` at full precision.
pub fn pose_json(p: &RigidPose) -> Value {
    json!({
        "R": rotation_to_array(&p.rotation).iter().map(|&v| json::num(v)).collect::<Vec<_>>(),
        "t": [json::num(p.translation.x), json::num(p.translation.y), json::num(p.translation.z)],
    })
}

pub fn read_image(path: &Path) -> Result<GrayImage> {
    let img = image::open(path).map_err(|e| Error::parse(path, e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let out = match img {
        image::DynamicImage::ImageLuma8(g) => GrayImage::from_luma8(w, h, g.as_raw()),
        other => GrayImage::from_rgb8(w, h, other.to_rgb8().as_raw()),
    };
    out.map_err(|e| Error::parse(path, e))
}

pub fn write_image(path: &Path, img: &GrayImage) -> Result<()> {
    let buf = image::GrayImage::from_raw(img.width() as u32, img.height() as u32, img.to_luma8())
        .expect("buffer size matches the image");
    buf.save(path).map_err(|e| Error::parse(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_value<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    json::write(path, &serde_json::to_value(value).map_err(|e| Error::parse(path, e))?)
}

/// Stems of the files in `dir` with extension `ext`, sorted.
pub fn list_ids(dir: &Path, ext: &str) -> Result<Vec<String>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::parse(dir, e))?;
    let mut ids = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) == Some(ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                ids.push(stem.to_string());
            }
        }
    }
    ids.sort();
    Ok(ids)
}

/// Labeled pixels per view id; entry `i` of a list is keypoint `i`.
pub type Keypoints = BTreeMap<String, Vec<Option<[f64; 2]>>>;

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSet {
    pub meta: Meta,
    pub ids: Vec<String>,
    pub views: Vec<RawReference>,
    pub points: Option<Vec<Vec3>>,
    pub keypoints: Option<Keypoints>,
}

impl ReferenceSet {
    /// Keypoints seen in at least two views, each triangulated from the
    /// pair of views whose rays are farthest from parallel.
    pub fn triangulated_keypoints(&self) -> Result<Vec<Vec3>> {
        let Some(kps) = &self.keypoints else {
            return Ok(Vec::new());
        };
        let index: BTreeMap<&str, usize> =
            self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let n = kps.values().map(|v| v.len()).max().unwrap_or(0);
        let mut out = Vec::new();
        for k in 0..n {
            let seen: Vec<(usize, Vec2)> = kps
                .iter()
                .filter_map(|(id, list)| {
                    let px = list.get(k).copied().flatten()?;
                    Some((*index.get(id.as_str())?, Vec2::new(px[0], px[1])))
                })
                .collect();
            let mut best: Option<(f64, usize, usize)> = None;
            for a in 0..seen.len() {
                for b in a + 1..seen.len() {
                    let ray = |(i, px): (usize, Vec2)| {
                        let v = &self.views[i];
                        (v.pose.rotation.transpose() * v.intrinsics.ray(&px)).normalize()
                    };
                    let cos = ray(seen[a]).dot(&ray(seen[b]));
                    if best.map_or(true, |(c, _, _)| cos < c) {
                        best = Some((cos, a, b));
                    }
                }
            }
            if let Some((_, a, b)) = best {
                let (va, vb) = (&self.views[seen[a].0], &self.views[seen[b].0]);
                out.push(triangulate(
                    &seen[a].1,
                    &va.pose,
                    &va.intrinsics,
                    &seen[b].1,
                    &vb.pose,
                    &vb.intrinsics,
                )?);
            }
        }
        Ok(out)
    }

    /// From `meta.json` when it has both center and diameter, otherwise
    /// estimated from the model points or the triangulated keypoints.
    /// Object frame with the default margin.
    pub fn frame(&self) -> Result<ObjectFrame> {
        self.frame_with_margin(DatabaseConfig::default().frame_margin)
    }

    /// Center and diameter from `meta.json` when both are given. Otherwise
    /// estimated from the points (or triangulated keypoints), grown to
    /// enclose them and scaled by `margin`; a single given value overrides
    /// its estimate.
    pub fn frame_with_margin(&self, margin: f64) -> Result<ObjectFrame> {
        if let (Some(c), Some(d)) = (self.meta.center, self.meta.diameter) {
            return Ok(ObjectFrame::new(Vec3::from(c), d)?);
        }
        let points = self.frame_points()?;
        let frame = estimate_frame(&points)?;
        let center = self.meta.center.map_or(frame.center, Vec3::from);
        match self.meta.diameter {
            Some(d) => Ok(ObjectFrame::new(center, d)?),
            None => Ok(ObjectFrame::new(center, frame.diameter)?.enclosing(&points, margin)),
        }
    }

    /// Object size for the ADD threshold: `meta.json`, else the largest
    /// distance between points. No margin.
    pub fn object_diameter(&self) -> Result<f64> {
        match self.meta.diameter {
            Some(d) => Ok(d),
            None => Ok(estimate_frame(&self.frame_points()?)?.diameter),
        }
    }

    fn frame_points(&self) -> Result<Vec<Vec3>> {
        let points = match &self.points {
            Some(p) => p.clone(),
            None => self.triangulated_keypoints()?,
        };
        if points.len() < 2 {
            return Err(Error::parse(
                "meta.json",
                "no center/diameter and too few points to estimate them",
            ));
        }
        Ok(points)
    }

    /// Points for ADD: `points.json`, else triangulated keypoints, else
    /// the eight corners of the normalized cube.
    pub fn model_points(&self) -> Result<Vec<Vec3>> {
        if let Some(p) = &self.points {
            if !p.is_empty() {
                return Ok(p.clone());
            }
        }
        let kp = self.triangulated_keypoints()?;
        if !kp.is_empty() {
            return Ok(kp);
        }
        let frame = self.frame()?;
        Ok(cube_corners()
            .iter()
            .map(|c| frame.denormalize_point(c))
            .collect())
    }
}

/// Corners of `[−1, 1]³`.
pub fn cube_corners() -> [Vec3; 8] {
    let mut out = [Vec3::zeros(); 8];
    for (i, c) in out.iter_mut().enumerate() {
        *c = Vec3::new(
            if i & 1 == 0 { -1.0 } else { 1.0 },
            if i & 2 == 0 { -1.0 } else { 1.0 },
            if i & 4 == 0 { -1.0 } else { 1.0 },
        );
    }
    out
}

pub fn read_reference_set(dir: &Path) -> Result<ReferenceSet> {
    if !dir.is_dir() {
        return Err(Error::parse(dir, "reference set directory not found"));
    }
    let meta: Meta = json::read_as(&dir.join("meta.json"))?;
    let views_dir = dir.join("views");
    let ids = list_ids(&views_dir, "png")?;
    let mut views = Vec::with_capacity(ids.len());
    for id in &ids {
        let cam_path = views_dir.join(format!("{id}.json"));
        if !cam_path.exists() {
            return Err(Error::MissingPose(id.clone()));
        }
        let cam: CameraFile = json::read_as(&cam_path)?;
        let image = read_image(&views_dir.join(format!("{id}.png")))?;
        views.push(RawReference {
            image,
            intrinsics: cam.intrinsics(id)?,
            pose: cam.pose(id)?,
        });
    }
    let points_path = dir.join("points.json");
    let points = if points_path.exists() {
        let raw: Vec<[f64; 3]> = json::read_as(&points_path)?;
        Some(raw.into_iter().map(Vec3::from).collect())
    } else {
        None
    };
    let kp_path = dir.join("keypoints.json");
    let keypoints = if kp_path.exists() {
        Some(json::read_as(&kp_path)?)
    } else {
        None
    };
    Ok(ReferenceSet {
        meta,
        ids,
        views,
        points,
        keypoints,
    })
}

pub fn write_reference_set(dir: &Path, set: &ReferenceSet) -> Result<()> {
    let views_dir = dir.join("views");
    create_dir(&views_dir)?;
    write_value(&dir.join("meta.json"), &set.meta)?;
    for (id, v) in set.ids.iter().zip(&set.views) {
        write_image(&views_dir.join(format!("{id}.png")), &v.image)?;
        write_value(
            &views_dir.join(format!("{id}.json")),
            &CameraFile::new(&v.intrinsics, Some(&v.pose)),
        )?;
    }
    if let Some(points) = &set.points {
        let raw: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        write_value(&dir.join("points.json"), &raw)?;
    }
    if let Some(kp) = &set.keypoints {
        write_value(&dir.join("keypoints.json"), kp)?;
    }
    Ok(())
}

/// Reads a reference set and prepares it for estimation.
pub fn load_reference_set(dir: &Path, config: DatabaseConfig) -> Result<(ReferenceSet, ReferenceDatabase)> {
    let set = read_reference_set(dir)?;
    if set.views.is_empty() {
        return Err(Error::parse(dir.join("views"), "no views"));
    }
    if !(config.frame_margin >= 1.0 && config.frame_margin.is_finite()) {
        return Err(Error::Config("frame_margin must be at least 1".into()));
    }
    let db = ReferenceDatabase::build(&set.views, set.frame_with_margin(config.frame_margin)?, config)?;
    Ok((set, db))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub id: String,
    pub image: GrayImage,
    pub intrinsics: Intrinsics,
}

/// `NNNN.png` with camera file `NNNN.json`; any pose in the camera file
/// is ignored.
pub fn read_queries(dir: &Path) -> Result<Vec<Query>> {
    if !dir.is_dir() {
        return Err(Error::parse(dir, "query directory not found"));
    }
    list_ids(dir, "png")?
        .into_iter()
        .map(|id| {
            let cam: CameraFile = json::read_as(&dir.join(format!("{id}.json")))?;
            Ok(Query {
                image: read_image(&dir.join(format!("{id}.png")))?,
                intrinsics: cam.intrinsics(&id)?,
                id,
            })
        })
        .collect()
}

/// Ground truth: camera files with poses, keyed by id.
pub fn read_poses(dir: &Path) -> Result<BTreeMap<String, (Intrinsics, RigidPose)>> {
    if !dir.is_dir() {
        return Err(Error::parse(dir, "pose directory not found"));
    }
    list_ids(dir, "json")?
        .into_iter()
        .map(|id| {
            let cam: CameraFile = json::read_as(&dir.join(format!("{id}.json")))?;
            let v = (cam.intrinsics(&id)?, cam.pose(&id)?);
            Ok((id, v))
        })
        .collect()
}

/// Paths of a synthetic fixture.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthLayout {
    pub reference: PathBuf,
    pub queries: PathBuf,
    pub gt: PathBuf,
}

impl SynthLayout {
    pub fn new(root: &Path) -> Self {
        Self {
            reference: root.join("reference"),
            queries: root.join("queries"),
            gt: root.join("gt"),
        }
    }
}

pub fn view_id(i: usize) -> String {
    format!("{i:04}")
}

/// Writes references with the object's corner keypoints and model
/// points, query images with intrinsics only, and ground-truth poses.
pub fn write_synth(root: &Path, scene: &SynthScene) -> Result<SynthLayout> {
    let layout = SynthLayout::new(root);
    let k = scene.intrinsics;
    let corners = scene.object.corners();
    let mut keypoints = Keypoints::new();
    for (i, v) in scene.references.iter().enumerate() {
        let list = corners
            .iter()
            .map(|c| project(&k, &v.pose, c).ok().map(|p| [p.x, p.y]))
            .collect();
        keypoints.insert(view_id(i), list);
    }
    let set = ReferenceSet {
        meta: Meta {
            object: "synthetic-plane".into(),
            center: Some([0.0; 3]),
            diameter: Some(scene.object.diameter()),
            units: default_units(),
        },
        ids: (0..scene.references.len()).map(view_id).collect(),
        views: scene
            .references
            .iter()
            .map(|v| RawReference {
                image: v.image.clone(),
                intrinsics: k,
                pose: v.pose,
            })
            .collect(),
        points: Some(scene.object.model_points(5)),
        keypoints: Some(keypoints),
    };
    write_reference_set(&layout.reference, &set)?;
    create_dir(&layout.queries)?;
    create_dir(&layout.gt)?;
    for (i, q) in scene.queries.iter().enumerate() {
        let id = view_id(i);
        write_image(&layout.queries.join(format!("{id}.png")), &q.image)?;
        write_value(&layout.queries.join(format!("{id}.json")), &CameraFile::new(&k, None))?;
        write_value(&layout.gt.join(format!("{id}.json")), &CameraFile::new(&k, Some(&q.pose)))?;
    }
    Ok(layout)
}
