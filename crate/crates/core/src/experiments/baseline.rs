//! The well-specified baseline: data drawn from the GP itself, bands built
//! from the true variance. The ratio metric should not depend on n.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::functions::derive_seed;
use super::output::{csv_bytes, OutputBundle};
use crate::error::{Error, Result};
use crate::gp::{build_correlation_matrix, cross_correlation, factorize, GpSampler, JitterPolicy};
use crate::kernels::special::{gamma, two_sided_quantile};
use crate::reliability::{ratio_metric_raw, Exponent};

/// Largest admissible spread `max/min` of `E^{1/p}` across n.
pub const CONSTANCY_SPREAD: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub n: usize,
    pub p: Exponent,
    pub replicates: usize,
    /// Evaluation points kept after dropping those that coincide with the design.
    pub eval_points: usize,
    /// `(mean_r E_r)^{1/p}`; the sup ratio averaged over paths for `p = ∞`.
    pub e_root: f64,
    /// Standard error of `mean_r E_r`.
    pub se_mean_e: f64,
    pub jitter_used: f64,
    pub infinite_ratio_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub p: Exponent,
    pub spread: f64,
    /// `(E|N(0,1)|^p)^{1/p} / (2q)`, the value an exactly calibrated band gives.
    pub gaussian_reference: Option<f64>,
    pub constant_across_n: bool,
}

#[derive(Debug, Clone)]
pub struct BaselineResult {
    pub config: ExperimentConfig,
    pub quantile: f64,
    pub rows: Vec<BaselineRow>,
}

/// `(E|Z|^p)^{1/p}` for `Z ~ N(0,1)`: `2^{p/2} Γ((p+1)/2) / sqrt(π)`.
pub fn gaussian_abs_moment_root(p: f64) -> f64 {
    (2f64.powf(p / 2.0) * gamma((p + 1.0) / 2.0) / std::f64::consts::PI.sqrt()).powf(1.0 / p)
}

pub fn run_gp_baseline(config: &ExperimentConfig) -> Result<BaselineResult> {
    config.validate()?;
    if config.noise_sd != 0.0 {
        return Err(Error::config("noise_sd", "the GP baseline needs noise_sd = 0"));
    }
    let kernel = config.kernel;
    let dim = kernel.dim();
    let q = two_sided_quantile(config.beta)?;
    let all_eval = config.eval.points(dim)?;
    let sigma2 = 1.0;
    let mut rows = Vec::with_capacity(config.n_list.len());
    for (j, &n) in config.n_list.iter().enumerate() {
        let design = config.grid(n, dim)?;
        let eval: Vec<Vec<f64>> = all_eval.iter().filter(|x| !design.points().contains(x)).cloned().collect();
        if eval.is_empty() {
            return Err(Error::config("eval", "every evaluation point coincides with the design"));
        }
        let mut joint = design.points().to_vec();
        joint.extend(eval.iter().cloned());
        let sampler = GpSampler::new(&joint, &kernel, sigma2, config.jitter_policy())?;
        let jitter = sampler.jitter_used();

        // same jitter on the design block as in the sampled covariance
        let r = build_correlation_matrix(design.points(), &kernel);
        let (chol, _) = factorize(&r, 0.0, JitterPolicy { initial: jitter, max: jitter.max(1e-300) })?;
        let cross: DMatrix<f64> = cross_correlation(design.points(), &eval, &kernel);
        let weights = chol.solve(&cross);
        let mut v = cross.clone();
        chol.l_dirty().solve_lower_triangular_mut(&mut v);
        let half_widths: Vec<f64> = v
            .column_iter()
            .map(|c| q * (sigma2 * (1.0 + jitter - c.norm_squared()).max(0.0)).sqrt())
            .collect();
        let widths: Vec<f64> = half_widths.iter().map(|h| 2.0 * h).collect();

        let per_path: Vec<(f64, usize)> = (0..config.replicates)
            .into_par_iter()
            .map(|rep| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.master_seed, &[j as u64, rep as u64]));
                let z = sampler.sample(&mut rng);
                let (y, truth) = z.split_at(n);
                let y = nalgebra::DVector::from_column_slice(y);
                let means = weights.tr_mul(&y);
                let errors: Vec<f64> = truth.iter().zip(means.iter()).map(|(f, m)| f - m).collect();
                let m = ratio_metric_raw(&errors, &widths, config.p)?;
                Ok((m.value, m.infinite_count))
            })
            .collect::<Result<_>>()?;
        let values: Vec<f64> = per_path.iter().map(|v| v.0).collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let se = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
            (var / values.len() as f64).sqrt()
        } else {
            0.0
        };
        let e_root = match config.p {
            Exponent::Finite(p) => mean.powf(1.0 / p),
            Exponent::Infinity => mean,
        };
        rows.push(BaselineRow {
            n,
            p: config.p,
            replicates: config.replicates,
            eval_points: eval.len(),
            e_root,
            se_mean_e: se,
            jitter_used: jitter,
            infinite_ratio_count: per_path.iter().map(|v| v.1).sum(),
        });
    }
    Ok(BaselineResult { config: config.clone(), quantile: q, rows })
}

impl BaselineResult {
    /// `max/min` of `E^{1/p}` across n.
    pub fn spread(&self) -> f64 {
        let (lo, hi) = self.rows.iter().fold((f64::INFINITY, 0.0f64), |(l, h), r| (l.min(r.e_root), h.max(r.e_root)));
        if lo > 0.0 {
            hi / lo
        } else {
            f64::INFINITY
        }
    }

    pub fn gaussian_reference(&self) -> Option<f64> {
        match self.config.p {
            Exponent::Finite(p) => Some(gaussian_abs_moment_root(p) / (2.0 * self.quantile)),
            Exponent::Infinity => None,
        }
    }

    pub fn summary(&self) -> BaselineSummary {
        let spread = self.spread();
        BaselineSummary {
            p: self.config.p,
            spread,
            gaussian_reference: self.gaussian_reference(),
            constant_across_n: spread < CONSTANCY_SPREAD,
        }
    }

    /// `config.json`, `gp_baseline.csv` and `summary.json`.
    pub fn to_bundle(&self) -> Result<OutputBundle> {
        let mut b = OutputBundle::default();
        b.push("config.json", self.config.to_json_pretty()? + "\n");
        let reference = self.gaussian_reference();
        b.push(
            "gp_baseline.csv",
            csv_bytes(|w| {
                w.write_record([
                    "n",
                    "p",
                    "replicates",
                    "eval_points",
                    "E_root",
                    "se_mean_E",
                    "gaussian_reference",
                    "jitter_used",
                ])?;
                for r in &self.rows {
                    w.write_record([
                        r.n.to_string(),
                        r.p.to_string(),
                        r.replicates.to_string(),
                        r.eval_points.to_string(),
                        r.e_root.to_string(),
                        r.se_mean_e.to_string(),
                        reference.map_or_else(String::new, |v| v.to_string()),
                        r.jitter_used.to_string(),
                    ])?;
                }
                Ok(())
            })?,
        );
        b.push("summary.json", serde_json::to_string_pretty(&self.summary())? + "\n");
        Ok(b)
    }
}
