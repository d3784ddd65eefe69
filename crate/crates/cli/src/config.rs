//! JSON experiment configuration. Every field is optional; unknown keys are rejected.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    /// Class-1 grid in `V_1 ~ R^2`, training `l_1` only.
    GridSubspace,
    /// Both grid classes in `R^4` at angle `theta`, training `l_1 + l_2`.
    GridAmbient,
    /// Uniform annulus data for class 1 in `R^d`, training `l_1` only.
    Annulus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    Random,
    Halfspace,
    Fan,
}

impl Init {
    pub fn name(self) -> &'static str {
        match self {
            Init::Random => "random",
            Init::Halfspace => "halfspace",
            Init::Fan => "fan",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnulusConfig {
    pub dim: usize,
    pub m_inner: f64,
    pub m_outer: f64,
    pub samples: usize,
}

impl Default for AnnulusConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            m_inner: 1.0,
            m_outer: 2.0,
            samples: 800,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub task: Task,
    /// Subspace angle for `grid-ambient` runs.
    pub theta: f64,
    /// Angles swept by `sweep-angle`.
    pub thetas: Vec<f64>,
    /// Total neuron count `2k`.
    pub width: usize,
    /// Total widths swept by `sweep-width`.
    pub widths: Vec<usize>,
    pub init: Init,
    pub eta: f64,
    pub max_iters: usize,
    /// Runs per cell; defaults to 100 (200 for `norm-hist`, 20 for `landscape-audit`).
    pub runs: Option<usize>,
    pub seed_base: u64,
    /// Seed for data noise and annulus sampling.
    pub data_seed: u64,
    /// Coordinatewise noise on the ambient grid; `sweep-angle` defaults to 0.05.
    pub noise_std: Option<f64>,
    pub record_every: usize,
    /// Per-neuron bias for the Lipschitz diagnostic; must keep `0 < sum(b) < 1`.
    pub bias: f64,
    /// Frame iterations for `trace-dynamics`; the final iterate is always added.
    pub snapshots: Vec<usize>,
    pub gc_pairs: Vec<(usize, usize)>,
    pub mc_trials: usize,
    pub lipschitz_pairs: usize,
    pub lipschitz_s_min: f64,
    pub hist_bins: usize,
    pub r_max: f64,
    pub rho_samples: usize,
    pub annulus: AnnulusConfig,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: Task::GridSubspace,
            theta: PI / 2.0,
            thetas: vec![PI / 6.0, PI / 4.0, PI / 3.0, PI / 2.0],
            width: 8,
            widths: vec![6, 8, 12, 24],
            init: Init::Random,
            eta: 0.1,
            max_iters: 5000,
            runs: None,
            seed_base: 0,
            data_seed: 0,
            noise_std: None,
            record_every: 1,
            bias: 0.05,
            snapshots: vec![0, 50, 200],
            gc_pairs: vec![(2, 3), (2, 4), (3, 5), (4, 8), (2, 64)],
            mc_trials: 100_000,
            lipschitz_pairs: 10_000,
            lipschitz_s_min: 1e-3,
            hist_bins: 20,
            r_max: 1e3,
            rho_samples: 360,
            annulus: AnnulusConfig::default(),
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            bail!("max_iters must be at least 1");
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            bail!("eta must be positive, got {}", self.eta);
        }
        if self.record_every < 1 {
            bail!("record_every must be at least 1");
        }
        for &th in self.thetas.iter().chain([&self.theta]) {
            if !(th > 0.0 && th <= PI / 2.0) {
                bail!("angles must lie in (0, pi/2], got {th}");
            }
        }
        for &w in self.widths.iter().chain([&self.width]) {
            if w < 2 || w % 2 != 0 {
                bail!("widths are total neuron counts 2k with k >= 1, got {w}");
            }
        }
        if let Some(s) = self.noise_std {
            if !(s >= 0.0 && s.is_finite()) {
                bail!("noise_std must be non-negative, got {s}");
            }
        }
        if self.runs == Some(0) {
            bail!("runs must be at least 1");
        }
        if self.hist_bins < 1 {
            bail!("hist_bins must be at least 1");
        }
        if self.rho_samples < 1 {
            bail!("rho_samples must be at least 1");
        }
        if !(self.bias >= 0.0 && self.bias.is_finite()) {
            bail!("bias must be non-negative, got {}", self.bias);
        }
        if !(self.lipschitz_s_min > 0.0 && self.lipschitz_s_min <= 1.0) {
            bail!("lipschitz_s_min must lie in (0, 1]");
        }
        let a = &self.annulus;
        if a.dim < 1 || a.samples < 1 || !(a.m_inner > 0.0 && a.m_inner < a.m_outer) {
            bail!("annulus needs dim >= 1, samples >= 1 and 0 < m_inner < m_outer");
        }
        if self.init == Init::Fan && (self.width != 6 || self.task != Task::GridSubspace) {
            bail!("fan initialization is defined for the grid-subspace task with width 6");
        }
        Ok(())
    }

    pub fn runs_or(&self, default: usize) -> usize {
        self.runs.unwrap_or(default)
    }

    /// Input dimension of the network for the configured task.
    pub fn input_dim(&self) -> usize {
        match self.task {
            Task::GridSubspace => 2,
            Task::GridAmbient => 4,
            Task::Annulus => self.annulus.dim,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ExperimentConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"eta": 0.1, "learning_rate": 1}"#).is_err());
        let partial: ExperimentConfig = serde_json::from_str(r#"{"task": "grid-ambient", "runs": 3}"#).unwrap();
        assert_eq!(partial.task, Task::GridAmbient);
        assert_eq!(partial.runs, Some(3));
        assert_eq!(partial.width, 8);
    }

    #[test]
    fn invalid_values() {
        let cfg = ExperimentConfig {
            max_iters: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig {
            thetas: vec![0.0],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig {
            widths: vec![7],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
