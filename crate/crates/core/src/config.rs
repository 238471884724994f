//! The run configuration file (TOML).
//!
//! ```toml
//! [modulation]
//! sample_rate = 1e6
//! bit_rate = 125e3
//!
//! [detection]
//! threshold = 0.25
//!
//! [scheduler]
//! window = 0.1
//! overlap = 0.01
//!
//! [[tags]]
//! id = "alpha"
//! seed = 7
//! period = 2.0
//! ```
//!
//! Every section is optional and falls back to the defaults of its type.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::codegen::{gen_code, ModulationParams, TagCode, TagId};
use crate::detector::DetectionConfig;
use crate::dsp::FrontendConfig;
use crate::error::{Error, Result};
use crate::scheduler::SchedulerConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TagSpec {
    /// Defaults to `tag-<seed>`.
    #[serde(default)]
    pub id: Option<String>,
    pub seed: u64,
    /// Seconds between transmissions.
    #[serde(default = "default_period")]
    pub period: f64,
}

fn default_period() -> f64 {
    1.0
}

impl TagSpec {
    pub fn tag_id(&self) -> TagId {
        match &self.id {
            Some(id) => TagId(id.clone()),
            None => TagId(format!("tag-{}", self.seed)),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub modulation: ModulationParams,
    pub frontend: FrontendConfig,
    pub detection: DetectionConfig,
    pub scheduler: SchedulerConfig,
    pub tags: Vec<TagSpec>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.modulation
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.scheduler.validate()?;
        if !(self.detection.threshold.is_finite()) {
            return Err(Error::Config("detection.threshold must be finite".into()));
        }
        if self.frontend.bandpass_taps == 0 {
            return Err(Error::Config("frontend.bandpass_taps must be >= 1".into()));
        }
        let mut seen = BTreeSet::new();
        for t in &self.tags {
            if !(t.period > 0.0 && t.period.is_finite()) {
                return Err(Error::Config(format!(
                    "tag {} period must be positive, got {}",
                    t.tag_id(),
                    t.period
                )));
            }
            if !seen.insert(t.tag_id()) {
                return Err(Error::Config(format!("duplicate tag id {}", t.tag_id())));
            }
        }
        Ok(())
    }

    /// Codes for the roster, in file order.
    pub fn codes(&self) -> Result<Vec<Arc<TagCode>>> {
        self.tags
            .iter()
            .map(|t| Ok(Arc::new(gen_code(t.seed, &self.modulation)?.with_id(t.tag_id()))))
            .collect()
    }

    pub fn tag(&self, id: &TagId) -> Option<&TagSpec> {
        self.tags.iter().find(|t| &t.tag_id() == id)
    }
}
