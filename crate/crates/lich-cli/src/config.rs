//! TOML experiment configuration: one flat table per run, with only the
//! keys relevant to the chosen subcommand read.

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use std::path::Path;

#[derive(Clone, Debug, Deserialize, Default)]
pub struct Thresholds {
    /// Relative σ_min below which a λ is a pole candidate.
    pub sigma_min: Option<f64>,
    /// Maximum distance between the σ_min location and a pencil eigenvalue.
    pub detector_agreement: Option<f64>,
    /// Maximum pole movement between N and 2N nodes.
    pub grid_stability: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, Default)]
pub struct FileConfig {
    // fibre-suite
    pub max_dim: Option<usize>,
    pub max_rank: Option<usize>,
    pub trials: Option<usize>,
    // identity-suite
    pub metric: Option<String>,
    pub dim: Option<usize>,
    pub points: Option<usize>,
    pub levels: Option<usize>,
    pub order: Option<usize>,
    // assemble
    pub m: Option<usize>,
    pub n: Option<i64>,
    // resonance-scan
    pub base: Option<String>,
    pub modes: Option<Vec<i64>>,
    /// `[re_min, re_max, im_min, im_max]`.
    pub lambda_window: Option<[f64; 4]>,
    #[serde(rename = "N")]
    pub nodes: Option<usize>,
    pub thresholds: Option<Thresholds>,
    pub svg: Option<bool>,
    // pipeline-thm
    pub ell: Option<i64>,
    pub lambda: Option<f64>,
    pub pipeline_nodes: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<(FileConfig, Vec<u8>)> {
        let Some(path) = path else {
            return Ok((FileConfig::default(), Vec::new()));
        };
        let raw = std::fs::read(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let text = std::str::from_utf8(&raw).context("config is not UTF-8")?;
        let cfg: FileConfig = toml::from_str(text)
            .with_context(|| format!("malformed config {}", path.display()))?;
        cfg.validate()?;
        Ok((cfg, raw))
    }

    fn validate(&self) -> Result<()> {
        if let Some(t) = &self.thresholds {
            for (name, v) in [
                ("sigma_min", t.sigma_min),
                ("detector_agreement", t.detector_agreement),
                ("grid_stability", t.grid_stability),
            ] {
                if let Some(v) = v {
                    if !(v > 0.0) {
                        bail!("threshold {name} must be positive, got {v}");
                    }
                }
            }
        }
        if let Some(w) = self.lambda_window {
            if !(w[0] < w[1]) || !(w[2] < w[3]) {
                bail!("lambda_window must satisfy re_min < re_max and im_min < im_max");
            }
        }
        if let Some(n) = self.nodes {
            if n < 16 {
                bail!("N must be at least 16");
            }
        }
        Ok(())
    }
}
