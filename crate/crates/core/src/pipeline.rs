//! Detection, viewpoint selection and refinement chained together.

use serde::{Deserialize, Serialize};

use crate::database::ReferenceDatabase;
use crate::detection::{detect, detection_to_translation, Detection, DetectorConfig};
use crate::error::Result;
use crate::geometry::{Intrinsics, RigidPose};
use crate::image::GrayImage;
use crate::refinement::{refine, Refinement, RefinerConfig};
use crate::selection::{select_view, Selection, SelectorConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub detector: DetectorConfig,
    pub selector: SelectorConfig,
    pub refiner: RefinerConfig,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.detector.validate()?;
        self.refiner.validate()?;
        if self.selector.n_angles == 0 {
            return Err(crate::Error::InvalidConfig("selector needs at least one angle"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    /// Object pose in raw object units.
    pub pose: RigidPose,
    /// Pose of the normalized object.
    pub pose_normalized: RigidPose,
    /// Normalized pose before refinement.
    pub initial: RigidPose,
    pub detection: Detection,
    pub selection: Selection,
    pub refinement: Refinement,
}

/// Estimates the pose of the database object in `query`.
pub fn estimate_pose(
    query: &GrayImage,
    k: &Intrinsics,
    db: &ReferenceDatabase,
    cfg: &PipelineConfig,
) -> Result<Estimate> {
    cfg.validate()?;
    let detection = detect(query, db, k, &cfg.detector)?;
    let t_init = detection_to_translation(&detection, k);
    let selection = select_view(query, k, &t_init, db, &cfg.selector)?;
    let initial = RigidPose::orthonormalized(selection.rotation, t_init)?;
    let refinement = refine(&initial, db, query, k, &cfg.refiner)?;
    let pose_normalized = refinement.pose;
    Ok(Estimate {
        pose: db.frame.denormalize_pose(&pose_normalized),
        pose_normalized,
        initial,
        detection,
        selection,
        refinement,
    })
}
