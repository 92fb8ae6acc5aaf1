//! Batch experiment drivers behind the command-line tool.
//!
//! Every driver is a pure function of its [`ExperimentConfig`]: trials use
//! per-trial seeded streams and rows are emitted in trial order, so reports are
//! byte-identical across runs and across the parallel and sequential builds.

mod decompose;
pub mod random;
mod sharpness;
mod verify;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::MeshSpec;

pub use decompose::{reverse_domination_constant, sparse_decompose, DecomposeReport, ExceptionalStats};
pub use sharpness::{default_deltas, sharpness, sharpness_row, SharpnessReport, SharpnessRow, DEFAULT_DEPTH};
pub use verify::{
    verify_cz, verify_frac, verify_maximal, BoundReportSummary, BoundTrial, MaximalReport, MaximalTrial,
};

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

/// Parameters shared by all commands; unset fields take per-command defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub alpha: Option<f64>,
    pub n: Option<usize>,
    #[serde(alias = "root-level")]
    pub root_level: Option<i32>,
    #[serde(alias = "resolution-level")]
    pub resolution_level: Option<i32>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub deltas: Option<Vec<f64>>,
    pub depth: Option<usize>,
    pub restarts: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub input: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($field:ident),*) => {
        ExperimentConfig { $($field: $top.$field.or($base.$field)),* }
    };
}

impl ExperimentConfig {
    /// Fields set in `top` win over `self`.
    pub fn overlay(self, top: ExperimentConfig) -> Self {
        let base = self;
        overlay!(base, top; p, q, alpha, n, root_level, resolution_level, trials, seed, deltas,
                 depth, restarts, out, format, input)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("config: {e}")))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(42)
    }

    pub fn trials_or(&self, default: usize) -> usize {
        self.trials.unwrap_or(default)
    }

    pub fn restarts(&self) -> usize {
        self.restarts.unwrap_or(8)
    }

    /// Mesh `[0, 2^K)^n` with cells of side `2^L`; defaults `n=1, K=0, L=-8`.
    pub fn mesh(&self) -> Result<MeshSpec> {
        let n = self.n.unwrap_or(1);
        let k = self.root_level.unwrap_or(0);
        let l = self.resolution_level.unwrap_or(k - 8 / n.max(1) as i32);
        MeshSpec::new(n, k, l).map_err(|e| Error::Precondition(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = ExperimentConfig::from_json(r#"{"p": 3.0, "trials": 5, "root-level": 1}"#).unwrap();
        let flags = ExperimentConfig { p: Some(2.0), ..Default::default() };
        let merged = file.overlay(flags);
        assert_eq!(merged.p, Some(2.0));
        assert_eq!(merged.trials, Some(5));
        assert_eq!(merged.root_level, Some(1));
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn default_mesh() {
        let m = ExperimentConfig::default().mesh().unwrap();
        assert_eq!((m.dim, m.root_level, m.resolution_level), (1, 0, -8));
        let m = ExperimentConfig { n: Some(2), ..Default::default() }.mesh().unwrap();
        assert_eq!(m.resolution_level, -4);
    }
}
