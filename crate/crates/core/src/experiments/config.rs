//! Experiment configuration: JSON with defaults, unknown keys rejected,
//! every validation failure reported against the offending key.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::designs::{grid_design, halton_points, midpoint_grid_design, Design};
use crate::error::{Error, Result};
use crate::gp::JitterPolicy;
use crate::kernels::KernelSpec;
use crate::reliability::Exponent;

/// Where the error and band are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EvalScheme {
    /// The first `count` Halton points.
    Halton { count: usize },
    /// `count` equispaced points including the endpoints (1-d only).
    Grid { count: usize },
}

impl Default for EvalScheme {
    fn default() -> Self {
        EvalScheme::Halton { count: 500 }
    }
}

impl EvalScheme {
    pub fn points(&self, dim: usize) -> Result<Vec<Vec<f64>>> {
        match *self {
            EvalScheme::Halton { count } => halton_points(count, dim),
            EvalScheme::Grid { count } => Ok(grid_design(count, dim)?.points().to_vec()),
        }
    }

    pub fn count(&self) -> usize {
        match *self {
            EvalScheme::Halton { count } | EvalScheme::Grid { count } => count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kernel: KernelSpec,
    pub n_list: Vec<usize>,
    pub eval: EvalScheme,
    pub jitter: f64,
    pub beta: f64,
    pub p: Exponent,
    /// Observation noise `σ_ε`; zero for the deterministic study.
    pub noise_sd: f64,
    /// Exponents α of `μ̂ₙ = c·n^α`; `None` means `{0, d/(2ν+d), 0.5, 0.8}`.
    pub alpha_list: Option<Vec<f64>>,
    /// Constant c of `μ̂ₙ = c·n^α`; `None` means `σ_ε²`.
    pub c: Option<f64>,
    pub replicates: usize,
    pub master_seed: u64,
    /// Grid size for the reference norm constant.
    pub reference_points: usize,
    /// Rescale the stochastic target to unit native norm.
    pub normalize_stochastic_target: bool,
    /// Grids include both endpoints (`k/(m−1)`); otherwise cell midpoints.
    pub grid_endpoints: bool,
    /// Start the reference-grid factorization at `jitter` rather than zero.
    pub reference_jitter: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kernel: KernelSpec::Matern { nu: 3.5, dim: 1 },
            n_list: (2..=20).map(|k| 20 * k).collect(),
            eval: EvalScheme::default(),
            jitter: 1e-8,
            beta: 0.05,
            p: Exponent::Finite(4.0),
            noise_sd: 0.0,
            alpha_list: None,
            c: None,
            replicates: 50,
            master_seed: 20_240_501,
            reference_points: 1000,
            normalize_stochastic_target: true,
            grid_endpoints: true,
            reference_jitter: true,
        }
    }
}

const KEYS: [&str; 15] = [
    "kernel",
    "n_list",
    "eval",
    "jitter",
    "beta",
    "p",
    "noise_sd",
    "alpha_list",
    "c",
    "replicates",
    "master_seed",
    "reference_points",
    "normalize_stochastic_target",
    "grid_endpoints",
    "reference_jitter",
];

impl ExperimentConfig {
    /// Setup of the α-sweep: `ν = 2.5`, `σ_ε = 0.1`, `n ∈ {100, 200, 400, 800}`.
    pub fn stochastic_preset() -> Self {
        ExperimentConfig {
            kernel: KernelSpec::Matern { nu: 2.5, dim: 1 },
            n_list: vec![100, 200, 400, 800],
            noise_sd: 0.1,
            ..ExperimentConfig::default()
        }
    }

    /// Setup of the GP-baseline check: `n ∈ {50, 100, 200}`, 200 paths.
    pub fn gp_baseline_preset() -> Self {
        ExperimentConfig { n_list: vec![50, 100, 200], replicates: 200, ..ExperimentConfig::default() }
    }

    /// Parses a JSON object, applying defaults for absent keys.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| Error::config("<file>", format!("malformed JSON: {e}")))?;
        Self::from_json_value(value, ExperimentConfig::default())
    }

    /// Overlays the keys of a JSON object on `base`.
    pub fn from_json_value(value: Value, base: ExperimentConfig) -> Result<Self> {
        let Value::Object(map) = value else {
            return Err(Error::config("<file>", "top level must be a JSON object"));
        };
        let mut merged = match serde_json::to_value(&base)? {
            Value::Object(m) => m,
            _ => unreachable!("config serializes to an object"),
        };
        for (key, v) in map {
            if !KEYS.contains(&key.as_str()) {
                return Err(Error::config(key, "unknown key"));
            }
            // decode the key on its own first so the error names it
            let mut single = Map::new();
            single.insert(key.clone(), v.clone());
            if let Err(e) = serde_json::from_value::<ExperimentConfig>(Value::Object(single)) {
                return Err(Error::config(key, e.to_string()));
            }
            merged.insert(key, v);
        }
        let cfg: ExperimentConfig =
            serde_json::from_value(Value::Object(merged)).map_err(|e| Error::config("<file>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_pretty()? + "\n")?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate().map_err(|e| Error::config("kernel", e.to_string()))?;
        if self.n_list.is_empty() {
            return Err(Error::config("n_list", "must not be empty"));
        }
        if self.n_list[0] < 2 {
            return Err(Error::config("n_list", "design sizes must be at least 2"));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("n_list", "must be strictly increasing"));
        }
        if self.eval.count() == 0 {
            return Err(Error::config("eval", "needs at least one point"));
        }
        if !(self.jitter.is_finite() && self.jitter >= 0.0) {
            return Err(Error::config("jitter", format!("must be nonnegative, got {}", self.jitter)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::config("beta", format!("must lie in (0,1), got {}", self.beta)));
        }
        self.p.validate().map_err(|e| Error::config("p", e.to_string()))?;
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(Error::config("noise_sd", format!("must be nonnegative, got {}", self.noise_sd)));
        }
        if let Some(alphas) = &self.alpha_list {
            if alphas.is_empty() {
                return Err(Error::config("alpha_list", "must not be empty"));
            }
            if let Some(a) = alphas.iter().find(|a| !(a.is_finite() && **a < 1.0)) {
                return Err(Error::config("alpha_list", format!("alpha must be finite and below 1, got {a}")));
            }
        }
        if let Some(c) = self.c {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::config("c", format!("must be positive, got {c}")));
            }
        }
        if self.replicates == 0 {
            return Err(Error::config("replicates", "must be at least 1"));
        }
        if self.reference_points < 2 {
            return Err(Error::config("reference_points", "must be at least 2"));
        }
        Ok(())
    }

    /// `α* = d/(2ν+d)`, the rate-optimal regularization exponent.
    pub fn optimal_alpha(&self) -> f64 {
        let d = self.kernel.dim() as f64;
        d / (2.0 * self.kernel.sobolev_order() + d)
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.alpha_list.clone().unwrap_or_else(|| vec![0.0, self.optimal_alpha(), 0.5, 0.8])
    }

    pub fn regularization_constant(&self) -> f64 {
        self.c.unwrap_or(self.noise_sd * self.noise_sd)
    }

    pub fn jitter_policy(&self) -> JitterPolicy {
        JitterPolicy { initial: self.jitter, ..JitterPolicy::default() }
    }

    /// Policy for the reference-grid factorization behind `C`.
    pub fn reference_jitter_policy(&self) -> JitterPolicy {
        if self.reference_jitter {
            self.jitter_policy()
        } else {
            JitterPolicy { initial: 0.0, ..JitterPolicy::default() }
        }
    }

    /// The `n`-point grid design under the `grid_endpoints` convention.
    pub fn grid(&self, n: usize, d: usize) -> Result<Design> {
        if self.grid_endpoints {
            grid_design(n, d)
        } else {
            midpoint_grid_design(n, d)
        }
    }
}
