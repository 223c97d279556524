//! TOML pipeline configuration. Every field is optional; command-line flags override it.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    pub constants: ConstantsConfig,
    pub loss: LossConfig,
    pub schedule: ScheduleConfig,
    pub sampling: SamplingConfig,
    pub canny: CannyConfig,
    pub spectrum: SpectrumConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub splats: Option<PathBuf>,
    pub cameras: Option<PathBuf>,
    /// Root against which the cameras' mask paths resolve.
    pub masks: Option<PathBuf>,
    /// Directory of grayscale images named like their masks.
    pub images: Option<PathBuf>,
    pub captions: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantsConfig {
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub kappa: Option<f64>,
    pub a_max: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub lambda_gc: Option<f64>,
    pub lambda_dssim: Option<f64>,
    pub lambda_l1: Option<f64>,
    pub penalty: Option<String>,
    pub delta: Option<f64>,
    pub residual: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub warmup: Option<u64>,
    pub iters: Option<u64>,
    pub lr: Option<f64>,
    pub max_gc_loss: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub mode: Option<String>,
    pub min_alpha: Option<f64>,
    pub crop: Option<String>,
    pub weighting: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CannyConfig {
    pub sigma: Option<f64>,
    pub low: Option<f64>,
    pub high: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub threshold: Option<f64>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the constraints that hold regardless of which command runs.
    pub fn validate(&self) -> Result<()> {
        let c = &self.constants;
        if let (Some(k1), Some(k2)) = (c.k1, c.k2) {
            if !(k1 > k2 && k2 > 0.0) {
                bail!("config: need k1 > k2 > 0 (got k1={k1}, k2={k2})");
            }
        }
        let l = &self.loss;
        for (name, v) in [
            ("lambda_gc", l.lambda_gc),
            ("lambda_dssim", l.lambda_dssim),
            ("lambda_l1", l.lambda_l1),
        ] {
            if let Some(v) = v {
                if !(v >= 0.0) {
                    bail!("config: {name} must be non-negative (got {v})");
                }
            }
        }
        Ok(())
    }
}
