//! Report bundle assembly: provenance block, pass/fail verdicts, atomic
//! artifact writes, and the static SVG scatter plot.

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Clone, Copy, PartialEq, Eq, Debug, clap::ValueEnum)]
pub enum Backend {
    /// Exact arithmetic; reports are byte-reproducible.
    Rational,
    /// Floating point; reports reproduce to rounding.
    Float,
}

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub version: String,
    pub config_sha256: String,
    pub backend: String,
    pub seed: u64,
    pub threads: usize,
    /// Omitted in rational mode so reports stay byte-identical.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<u128>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: &str, pass: bool, detail: String) -> Self {
        Verdict { name: name.to_string(), pass, detail }
    }
}

#[derive(Serialize)]
pub struct ReportBundle {
    pub command: String,
    pub provenance: Provenance,
    pub verdicts: Vec<Verdict>,
    pub pass: bool,
    pub results: Value,
}

impl ReportBundle {
    pub fn new(
        command: &str,
        backend: Backend,
        seed: u64,
        threads: usize,
        config_bytes: &[u8],
        verdicts: Vec<Verdict>,
        results: Value,
        wall_time_ms: u128,
    ) -> Self {
        let pass = verdicts.iter().all(|v| v.pass);
        ReportBundle {
            command: command.to_string(),
            provenance: Provenance {
                version: env!("CARGO_PKG_VERSION").to_string(),
                config_sha256: hex_digest(config_bytes),
                backend: format!("{backend:?}").to_lowercase(),
                seed,
                threads,
                wall_time_ms: match backend {
                    Backend::Rational => None,
                    Backend::Float => Some(wall_time_ms),
                },
            },
            verdicts,
            pass,
            results,
        }
    }

    pub fn summary(&self) -> String {
        let mut out = format!("{}:\n", self.command);
        for v in &self.verdicts {
            out.push_str(&format!(
                "  {:<32} {}  {}\n",
                v.name,
                if v.pass { "pass" } else { "FAIL" },
                v.detail
            ));
        }
        out.push_str(&format!("overall: {}\n", if self.pass { "pass" } else { "FAIL" }));
        out
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Write a file atomically: temp file in the target directory, then rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output dir {}", dir.display()))?;
    let tmp = dir.join(format!(".tmp-{name}"));
    std::fs::write(&tmp, bytes)
        .with_context(|| format!("cannot write {}", tmp.display()))?;
    let target = dir.join(name);
    std::fs::rename(&tmp, &target)
        .with_context(|| format!("cannot move report into place at {}", target.display()))?;
    Ok(())
}

/// Minimal static scatter plot of pole locations inside a λ-window.
pub fn pole_scatter_svg(
    window: (f64, f64, f64, f64),
    poles: &[(f64, f64)],
) -> String {
    let (re_min, re_max, im_min, im_max) = window;
    let (w, h, pad) = (640.0, 400.0, 40.0);
    let sx = |re: f64| pad + (re - re_min) / (re_max - re_min) * (w - 2.0 * pad);
    let sy = |im: f64| h - pad - (im - im_min) / (im_max - im_min) * (h - 2.0 * pad);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\">\n<rect x=\"{pad}\" y=\"{pad}\" width=\"{}\" height=\"{}\" \
         fill=\"none\" stroke=\"black\"/>\n",
        w - 2.0 * pad,
        h - 2.0 * pad
    );
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\">Re λ ∈ [{re_min}, {re_max}]</text>\n",
        pad,
        h - pad / 3.0
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\">Im λ ∈ [{im_min}, {im_max}]</text>\n",
        pad,
        pad / 1.5
    ));
    for &(re, im) in poles {
        svg.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"crimson\"/>\n",
            sx(re),
            sy(im)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
