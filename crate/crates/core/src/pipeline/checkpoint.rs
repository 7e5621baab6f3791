use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FeaturizeConfig, PipelineError, PreparedCohort, Standardizer};
use crate::cohort::SplitFractions;
use crate::model::{FusionModelParams, ParamsFile};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// Settings needed to rebuild model inputs exactly as during training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeaturizationMeta {
    pub featurize: FeaturizeConfig,
    pub lambda: f64,
    pub standardizer: Standardizer,
    pub split_seed: u64,
    pub split_fractions: SplitFractions,
    pub vitals_channels: Vec<String>,
    pub hours: usize,
}

/// A trained model plus its featurization, stored as one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub model: ParamsFile,
    pub featurization: FeaturizationMeta,
}

impl Checkpoint {
    pub fn new(
        params: &FusionModelParams,
        init_seed: u64,
        featurization: FeaturizationMeta,
    ) -> Self {
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            model: ParamsFile::from_params(params, init_seed),
            featurization,
        }
    }

    pub fn params(&self) -> Result<FusionModelParams, PipelineError> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(PipelineError::Config(format!(
                "unsupported checkpoint format version {}",
                self.format_version
            )));
        }
        Ok(self.model.to_params()?)
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("checkpoint serializes");
        bytes.push(b'\n');
        bytes
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        std::fs::write(path, self.to_json()).map_err(|source| PipelineError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| PipelineError::Json {
            path: path.display().to_string(),
            source,
        })
    }

    /// Errors when the stored dimensions disagree with each other or with
    /// the featurized data.
    pub(crate) fn check_compatible(&self, prep: &PreparedCohort) -> Result<(), PipelineError> {
        let dims = self.model.dims;
        let meta = &self.featurization;
        let checks = [
            ("text width b", dims.b, meta.featurize.text_dim()),
            ("text width b", dims.b, prep.text_dim),
            ("vitals channels d", dims.d, prep.d()),
            ("standardizer width", dims.d, meta.standardizer.mean.len()),
            ("hours T", dims.t, meta.hours),
        ];
        for (what, expected, found) in checks {
            if expected != found {
                return Err(PipelineError::Dimension {
                    what,
                    expected,
                    found,
                });
            }
        }
        if let Some(f) = prep.features.first() {
            if f.vitals.len() != dims.t {
                return Err(PipelineError::Dimension {
                    what: "hours T",
                    expected: dims.t,
                    found: f.vitals.len(),
                });
            }
            if f.summary.len() != dims.b {
                return Err(PipelineError::Dimension {
                    what: "text width b",
                    expected: dims.b,
                    found: f.summary.len(),
                });
            }
        }
        Ok(())
    }
}
