//! Run configuration: loss constants plus evaluation/detection knobs, all
//! defaulting to the pipeline's published values and overridable per run via
//! a JSON file or CLI flags.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use kneeseg::detection;
use kneeseg::losses::LossConfig;
use kneeseg::morphology::{ComponentDistance, Connectivity, DEFAULT_ALLOWANCE_VOXELS};

fn default_allowance() -> f64 {
    DEFAULT_ALLOWANCE_VOXELS
}
fn default_sizes() -> Vec<f64> {
    detection::default_size_thresholds()
}
fn default_probs() -> Vec<f64> {
    detection::default_prob_thresholds()
}
fn default_postprocess() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub loss: LossConfig,
    #[serde(default)]
    pub connectivity: Connectivity,
    #[serde(default)]
    pub component_distance: ComponentDistance,
    /// Allowance (voxels) for the largest-component filter.
    #[serde(default = "default_allowance")]
    pub allowance_voxels: f64,
    #[serde(default = "default_sizes")]
    pub size_thresholds_mm3: Vec<f64>,
    #[serde(default = "default_probs")]
    pub prob_thresholds: Vec<f64>,
    /// Classes to evaluate; `null` means every non-background class.
    #[serde(default)]
    pub classes: Option<Vec<u8>>,
    #[serde(default = "default_postprocess")]
    pub postprocess: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            loss: LossConfig::default(),
            connectivity: Connectivity::default(),
            component_distance: ComponentDistance::default(),
            allowance_voxels: default_allowance(),
            size_thresholds_mm3: default_sizes(),
            prob_thresholds: default_probs(),
            classes: None,
            postprocess: default_postprocess(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let cfg = match path {
            None => RunConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config {}", p.display()))?
            }
        };
        cfg.loss.validate().context("invalid loss configuration")?;
        Ok(cfg)
    }
}
