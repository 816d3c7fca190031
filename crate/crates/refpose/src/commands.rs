//! The four commands, independent of argument parsing.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use refpose_core::database::ReferenceDatabase;
use refpose_core::evaluation::{
    add_error, add_s_error, proj_error, report, EvalRecord, EvalReport, ObjectMeta,
};
use refpose_core::geometry::{RigidPose, Vec3};
use refpose_core::pipeline::{estimate_pose, Estimate, PipelineConfig};
use refpose_core::selection::viewpoint_angle;
use refpose_core::synth::{make_scene, SynthConfig};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::dataio::{
    self, list_ids, load_reference_set, pose_from_arrays, pose_json, read_poses, read_queries,
    read_reference_set, CameraFile, Query, SynthLayout,
};
use crate::error::{Error, Result};
use crate::json;
use crate::overlay::render_overlay;

pub const MANIFEST: &str = "manifest.json";

fn estimate_json(id: &str, est: &Estimate, db: &ReferenceDatabase, view_ids: &[String]) -> Value {
    let det = &est.detection;
    let sel = &est.selection;
    let iterations: Vec<Value> = est
        .refinement
        .iterations
        .iter()
        .map(|d| {
            json!({
                "objective_initial": json::num9(d.objective_initial),
                "objective": json::num9(d.objective),
                "evaluations": d.evaluations,
                "valid_fraction": json::num9(d.valid_fraction),
                "neighbors": d.neighbors.iter().map(|&i| view_ids[i].clone()).collect::<Vec<_>>(),
                "residual_scale": json::num9(d.residual_scale),
                "residual_angle_deg": json::num9(d.residual_angle.to_degrees()),
            })
        })
        .collect();
    let mut out = pose_json(&est.pose);
    let obj = out.as_object_mut().expect("pose json is an object");
    obj.insert("id".into(), json!(id));
    obj.insert("status".into(), json!("ok"));
    obj.insert(
        "diagnostics".into(),
        json!({
            "detection": {
                "score": json::num9(det.score),
                "center": [json::num9(det.q.x), json::num9(det.q.y)],
                "scale": json::num9(det.scale),
                "box_size": json::num9(det.box_size),
                "depth": json::num9(det.depth),
                "template": view_ids[det.template].clone(),
            },
            "selection": {
                "view": view_ids[sel.view].clone(),
                "alpha_deg": json::num9(sel.alpha.to_degrees()),
            },
            "initial": pose_json(&db.frame.denormalize_pose(&est.initial)),
            "iterations": iterations,
            "warning": est.refinement.warning.as_ref().map(|w| w.to_string()),
        }),
    );
    out
}

fn failure_json(id: &str, err: &refpose_core::Error) -> Value {
    json!({
        "id": id,
        "status": "failed",
        "error": {"kind": error_kind(err), "message": err.to_string()},
    })
}

fn error_kind(err: &refpose_core::Error) -> &'static str {
    use refpose_core::Error as E;
    match err {
        E::NoDetection { .. } => "NoDetection",
        E::EmptyVolume { .. } => "EmptyVolume",
        E::CameraInsideSphere(_) => "CameraInsideSphere",
        E::NonPositiveDepth(_) => "NonPositiveDepth",
        E::ImageTooSmall { .. } => "ImageTooSmall",
        _ => "EstimationError",
    }
}

/// Runs the pipeline on one query and renders its output file.
pub fn estimate_query(q: &Query, db: &ReferenceDatabase, cfg: &PipelineConfig, view_ids: &[String]) -> Value {
    match estimate_pose(&q.image, &q.intrinsics, db, cfg) {
        Ok(est) => estimate_json(&q.id, &est, db, view_ids),
        Err(e) => failure_json(&q.id, &e),
    }
}

/// Summary written next to the per-query files.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub queries: Vec<String>,
    pub failed: Vec<String>,
}

pub fn cmd_estimate(cfg: &RunConfig) -> Result<Manifest> {
    cfg.validate()?;
    let (reference, queries, output) = (
        cfg.reference.as_deref().expect("validated"),
        cfg.queries.as_deref().expect("validated"),
        cfg.output.as_deref().expect("validated"),
    );
    let (set, db) = load_reference_set(reference, cfg.database)?;
    let queries = read_queries(queries)?;
    fs::create_dir_all(output).map_err(|e| Error::io(output, e))?;
    let run = || -> Vec<Value> {
        queries
            .par_iter()
            .map(|q| estimate_query(q, &db, &cfg.pipeline, &set.ids))
            .collect()
    };
    let results = if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(run)
    } else {
        run()
    };
    let mut failed = Vec::new();
    for (q, v) in queries.iter().zip(&results) {
        if v["status"] != "ok" {
            failed.push(q.id.clone());
        }
        json::write(&output.join(format!("{}.json", q.id)), v)?;
    }
    let manifest = Manifest {
        queries: queries.iter().map(|q| q.id.clone()).collect(),
        failed,
    };
    json::write(
        &output.join(MANIFEST),
        &json!({"queries": manifest.queries, "failed": manifest.failed}),
    )?;
    Ok(manifest)
}

/// A prediction file: the pose and the selected reference, or `None`
/// for a failed query.
fn read_prediction(path: &Path) -> Result<Option<(RigidPose, Option<String>)>> {
    let v = json::read(path)?;
    if v["status"] != "ok" {
        return Ok(None);
    }
    let arr = |key: &str, n: usize| -> Result<Vec<f64>> {
        let a = v[key]
            .as_array()
            .filter(|a| a.len() == n)
            .ok_or_else(|| Error::parse(path, format!("`{key}` must hold {n} numbers")))?;
        a.iter()
            .map(|x| x.as_f64().ok_or_else(|| Error::parse(path, format!("`{key}` must hold numbers"))))
            .collect()
    };
    let r: [f64; 9] = arr("R", 9)?.try_into().expect("length checked");
    let t: [f64; 3] = arr("t", 3)?.try_into().expect("length checked");
    let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    let pose = pose_from_arrays(&r, &t).map_err(|source| Error::InvalidPose { id: id.into(), source })?;
    let view = v["diagnostics"]["selection"]["view"].as_str().map(str::to_string);
    Ok(Some((pose, view)))
}

/// Joins predictions and ground truth by id and computes every metric.
/// Failed queries count with infinite errors.
pub fn cmd_evaluate(pred_dir: &Path, gt_dir: &Path, reference: &Path) -> Result<EvalReport> {
    let set = read_reference_set(reference)?;
    let frame = set.frame()?;
    let points = set.model_points()?;
    let gt = read_poses(gt_dir)?;
    if !pred_dir.is_dir() {
        return Err(Error::parse(pred_dir, "prediction directory not found"));
    }
    let pred_ids: BTreeSet<String> = list_ids(pred_dir, "json")?
        .into_iter()
        .filter(|id| format!("{id}.json") != MANIFEST)
        .collect();
    let gt_ids: BTreeSet<String> = gt.keys().cloned().collect();
    if pred_ids != gt_ids {
        let only_pred: Vec<_> = pred_ids.difference(&gt_ids).cloned().collect();
        let only_gt: Vec<_> = gt_ids.difference(&pred_ids).cloned().collect();
        return Err(Error::IdMismatch(format!(
            "only predicted: {only_pred:?}, only ground truth: {only_gt:?}"
        )));
    }
    let ref_viewpoints: BTreeMap<&str, Vec3> = set
        .ids
        .iter()
        .zip(&set.views)
        .map(|(id, v)| Ok((id.as_str(), frame.normalize_pose(&v.pose).viewpoint()?)))
        .collect::<refpose_core::Result<_>>()?;
    let mut records = Vec::with_capacity(gt.len());
    for (id, (k, pose_gt)) in &gt {
        let vp = frame.normalize_pose(pose_gt).viewpoint()?;
        let view_diff_gt = ref_viewpoints
            .values()
            .map(|u| viewpoint_angle(&vp, u))
            .collect::<refpose_core::Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let record = match read_prediction(&pred_dir.join(format!("{id}.json")))? {
            Some((pose, view)) => EvalRecord {
                id: id.clone(),
                add: add_error(&points, pose_gt, &pose)?,
                add_s: add_s_error(&points, pose_gt, &pose)?,
                prj: proj_error(&points, k, pose_gt, &pose).unwrap_or(f64::INFINITY),
                view_diff_gt,
                view_diff_sel: match view.as_deref().and_then(|v| ref_viewpoints.get(v)) {
                    Some(u) => viewpoint_angle(&vp, u)?,
                    None => f64::INFINITY,
                },
            },
            None => EvalRecord {
                id: id.clone(),
                add: f64::INFINITY,
                add_s: f64::INFINITY,
                prj: f64::INFINITY,
                view_diff_gt,
                view_diff_sel: f64::INFINITY,
            },
        };
        records.push(record);
    }
    let meta = ObjectMeta {
        name: set.meta.object.clone(),
        diameter: set.object_diameter()?,
    };
    Ok(report(&records, &meta)?)
}

/// Key-sorted report with 9 significant digits; angles in degrees.
pub fn report_json(r: &EvalReport) -> Value {
    let records: Vec<Value> = r
        .records
        .iter()
        .map(|rec| {
            json!({
                "id": rec.id,
                "add": json::num9(rec.add),
                "add_s": json::num9(rec.add_s),
                "prj": json::num9(rec.prj),
                "view_diff_gt_deg": json::num9(rec.view_diff_gt.to_degrees()),
                "view_diff_sel_deg": json::num9(rec.view_diff_sel.to_degrees()),
            })
        })
        .collect();
    json!({
        "object": r.object,
        "diameter": json::num9(r.diameter),
        "count": r.count,
        "add_01d": json::num9(r.add_01d),
        "add_s_01d": json::num9(r.add_s_01d),
        "add_auc": json::num9(r.add_auc),
        "prj5": json::num9(r.prj5),
        "mean_add": json::num9(r.mean_add),
        "median_add": json::num9(r.median_add),
        "mean_prj": json::num9(r.mean_prj),
        "mean_view_diff_gt_deg": json::num9(r.mean_view_diff_gt.to_degrees()),
        "median_view_diff_gt_deg": json::num9(r.median_view_diff_gt.to_degrees()),
        "mean_view_diff_sel_deg": json::num9(r.mean_view_diff_sel.to_degrees()),
        "median_view_diff_sel_deg": json::num9(r.median_view_diff_sel.to_degrees()),
        "records": records,
    })
}

pub fn cmd_make_synth(root: &Path, cfg: &SynthConfig) -> Result<SynthLayout> {
    let scene = make_scene(cfg).map_err(|e| match e {
        refpose_core::Error::TooFewReferences { .. } => Error::Config(e.to_string()),
        other => other.into(),
    })?;
    dataio::write_synth(root, &scene)
}

/// Draws the cube for a predicted and/or ground-truth pose onto a query
/// image. `camera` supplies the intrinsics.
pub fn cmd_overlay(
    image: &Path,
    camera: &Path,
    reference: &Path,
    pred: Option<&Path>,
    gt: Option<&Path>,
    output: &Path,
) -> Result<()> {
    let img = dataio::read_image(image)?;
    let frame = read_reference_set(reference)?.frame()?;
    let cam: CameraFile = json::read_as(camera)?;
    let k = cam.intrinsics(&camera.display().to_string())?;
    let gt = match gt {
        Some(p) => {
            let cam: CameraFile = json::read_as(p)?;
            Some(cam.pose(&p.display().to_string())?)
        }
        None => None,
    };
    let pred = match pred {
        Some(p) => Some(read_prediction(p)?.ok_or_else(|| Error::parse(p, "prediction failed"))?.0),
        None => None,
    };
    let out = render_overlay(&img, &k, &frame, pred.as_ref(), gt.as_ref());
    out.save(output).map_err(|e| Error::parse(output, e))
}
