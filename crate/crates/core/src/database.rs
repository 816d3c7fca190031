//! Posed reference views prepared for detection, selection and refinement.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Intrinsics, RigidPose};
use crate::image::GrayImage;
use crate::objectframe::{normalize_reference, ObjectFrame, ReferenceView};
use crate::sampling::fps_sample;

/// A reference image as captured, with its object-to-camera pose in raw
/// object units.
#[derive(Debug, Clone, PartialEq)]
pub struct RawReference {
    pub image: GrayImage,
    pub intrinsics: Intrinsics,
    pub pose: RigidPose,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatabaseConfig {
    /// Side of the detector templates.
    pub template_size: usize,
    /// Side of the views used by the selector and the refiner.
    pub view_size: usize,
    pub n_detector: usize,
    pub n_selector: usize,
    /// Growth applied to an object frame estimated from points, so that
    /// the normalized object fits inside the unit sphere with room to spare.
    pub frame_margin: f64,
}

impl Default for DatabaseConfig {
    fn default() -> Self {
        Self {
            template_size: 120,
            view_size: 128,
            n_detector: 32,
            n_selector: 64,
            frame_margin: 1.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceDatabase {
    pub frame: ObjectFrame,
    /// Normalized views at `view_size`.
    pub views: Vec<ReferenceView>,
    /// Normalized views at `template_size`, same order as `views`.
    pub templates: Vec<GrayImage>,
    pub detector_subset: Vec<usize>,
    pub selector_subset: Vec<usize>,
    pub config: DatabaseConfig,
}

impl ReferenceDatabase {
    pub fn build(raw: &[RawReference], frame: ObjectFrame, config: DatabaseConfig) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::TooFewReferences {
                needed: 1,
                available: 0,
            });
        }
        if config.template_size == 0 || config.view_size == 0 {
            return Err(Error::InvalidConfig("reference sizes must be positive"));
        }
        if config.n_detector == 0 || config.n_selector == 0 {
            return Err(Error::InvalidConfig("subset sizes must be positive"));
        }
        let mut views = Vec::with_capacity(raw.len());
        let mut templates = Vec::with_capacity(raw.len());
        for r in raw {
            views.push(normalize_reference(
                &r.image,
                &r.intrinsics,
                &r.pose,
                &frame,
                config.view_size,
            )?);
            templates.push(
                normalize_reference(&r.image, &r.intrinsics, &r.pose, &frame, config.template_size)?
                    .image,
            );
        }
        let viewpoints: Vec<_> = views.iter().map(|v| v.viewpoint).collect();
        Ok(Self {
            frame,
            detector_subset: fps_sample(&viewpoints, config.n_detector),
            selector_subset: fps_sample(&viewpoints, config.n_selector),
            views,
            templates,
            config,
        })
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    pub fn template_size(&self) -> f64 {
        self.config.template_size as f64
    }
}
