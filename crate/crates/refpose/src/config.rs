use std::path::{Path, PathBuf};

use refpose_core::database::DatabaseConfig;
use refpose_core::pipeline::PipelineConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json;

/// Everything `estimate` needs. Readable from JSON; command-line flags
/// override individual fields.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub reference: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// Worker threads; 0 uses one per core.
    pub threads: usize,
    pub database: DatabaseConfig,
    pub pipeline: PipelineConfig,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        json::to_string(&serde_json::to_value(self).expect("config serializes"))
    }

    /// Parameter ranges and required paths.
    pub fn validate(&self) -> Result<()> {
        self.pipeline
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        let d = &self.database;
        if d.template_size == 0 || d.view_size == 0 || d.n_detector == 0 || d.n_selector == 0 {
            return Err(Error::Config("database sizes must be positive".into()));
        }
        if !(d.frame_margin >= 1.0 && d.frame_margin.is_finite()) {
            return Err(Error::Config("database frame_margin must be at least 1".into()));
        }
        if d.view_size != self.pipeline.refiner.crop_size {
            return Err(Error::Config(
                "database view_size must equal refiner crop_size".into(),
            ));
        }
        for (name, p) in [
            ("reference", &self.reference),
            ("queries", &self.queries),
            ("output", &self.output),
        ] {
            if p.is_none() {
                return Err(Error::Config(format!("missing {name} path")));
            }
        }
        Ok(())
    }
}
