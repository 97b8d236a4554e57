//! The noisy-data study: regularized kriging with `μ̂ₙ = c·n^α` on uniform
//! random designs, swept over α and n with independent replicates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::functions::{derive_seed, estimate_reference_norm_constant_on, test_function_gramacy};
use super::output::{csv_bytes, OutputBundle};
use crate::designs::uniform_random_design;
use crate::error::{Error, Result};
use crate::gp::{fit, FitConfig, MuMode, Sigma2Mode};
use crate::reliability::{loglog_slope, pointwise_ratio, LogLogFit};

/// Per-replicate Monte-Carlo estimates on the evaluation set.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Replicate {
    err2: f64,
    ratio2: f64,
    width2: f64,
    infinite: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticCell {
    pub alpha: f64,
    pub n: usize,
    pub replicates: usize,
    /// Mean of `‖f − f̂ₙ‖²` over replicates, and its standard error.
    pub mean_err2: f64,
    pub se_err2: f64,
    /// Mean of `‖(f − f̂ₙ)/c̃‖²` with `c̃ = q·sqrt(σ̂²P²)` the half-width.
    pub mean_ratio2: f64,
    pub se_ratio2: f64,
    /// Mean of `‖c̃‖²`.
    pub mean_width2: f64,
    pub se_width2: f64,
    pub infinite_ratio_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaTrend {
    pub alpha: f64,
    pub err2_fit: Option<LogLogFit>,
    pub ratio2_fit: Option<LogLogFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticChecks {
    /// α* has the smallest mean error² at the largest n.
    pub optimal_alpha_best_at_largest_n: Option<bool>,
    /// The error slope of α* is within ±0.25 of `−2ν/(2ν+d)`.
    pub optimal_alpha_rate: Option<bool>,
    /// The largest α above α* decays at least 0.1 slower than α*.
    pub high_alpha_slower: Option<bool>,
    /// The mean ratio² for the largest α above α* increases with n.
    pub high_alpha_ratio_increasing: Option<bool>,
    /// The mean ratio² for α = 0 stays within a factor 2 across n.
    pub zero_alpha_ratio_bounded: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticSummary {
    pub optimal_alpha: f64,
    pub optimal_rate: f64,
    pub target_native_norm_sq: f64,
    pub trends: Vec<AlphaTrend>,
    pub infinite_ratio_count: usize,
    pub checks: StochasticChecks,
}

#[derive(Debug, Clone)]
pub struct StochasticResult {
    pub config: ExperimentConfig,
    pub alphas: Vec<f64>,
    /// Native norm² of the unscaled test function on the reference grid.
    pub target_native_norm_sq: f64,
    /// Multiplier applied to the test function.
    pub target_scale: f64,
    /// Cells ordered by α index, then n.
    pub cells: Vec<StochasticCell>,
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn run_stochastic_experiment(config: &ExperimentConfig) -> Result<StochasticResult> {
    config.validate()?;
    if config.kernel.dim() != 1 {
        return Err(Error::config("kernel", "the stochastic study uses the 1-d test function"));
    }
    if config.noise_sd <= 0.0 {
        return Err(Error::config("noise_sd", "the stochastic study needs noise_sd > 0"));
    }
    let c = config.regularization_constant();
    let alphas = config.alphas();
    for &alpha in &alphas {
        MuMode::PowerLaw { c, alpha }.validate().map_err(|e| Error::config("alpha_list", e.to_string()))?;
    }
    let kernel = config.kernel;
    let norm_sq = estimate_reference_norm_constant_on(
        test_function_gramacy,
        &kernel,
        &config.grid(config.reference_points, 1)?,
        config.reference_jitter_policy(),
    )? / 2.0;
    let target_scale = if config.normalize_stochastic_target {
        if norm_sq <= 0.0 {
            return Err(Error::config("normalize_stochastic_target", "target has zero native norm"));
        }
        1.0 / norm_sq.sqrt()
    } else {
        1.0
    };
    let target = |x: f64| target_scale * test_function_gramacy(x);
    let eval_points = config.eval.points(1)?;
    let truth: Vec<f64> = eval_points.iter().map(|x| target(x[0])).collect();

    let keys: Vec<(usize, usize, usize)> = (0..alphas.len())
        .flat_map(|a| (0..config.n_list.len()).flat_map(move |j| (0..config.replicates).map(move |r| (a, j, r))))
        .collect();
    let reps: Vec<Replicate> = keys
        .par_iter()
        .map(|&(a, j, r)| {
            let seed = derive_seed(config.master_seed, &[a as u64, j as u64, r as u64]);
            let n = config.n_list[j];
            let design = uniform_random_design(n, 1, derive_seed(seed, &[0]))?;
            let mut noise = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[1]));
            let y: Vec<f64> = design
                .points()
                .iter()
                .map(|x| {
                    let xi: f64 = StandardNormal.sample(&mut noise);
                    target(x[0]) + config.noise_sd * xi
                })
                .collect();
            let fit_config = FitConfig {
                mu_mode: MuMode::PowerLaw { c, alpha: alphas[a] },
                sigma2_mode: Sigma2Mode::MleScaled,
                beta: config.beta,
                jitter: config.jitter,
            };
            let model = fit(&design, &y, &kernel, &fit_config)?;
            let eval = model.evaluate(&eval_points)?;
            let (q, s2) = (model.quantile(), model.sigma2_hat());
            let m = truth.len() as f64;
            let (mut err2, mut ratio2, mut width2, mut infinite) = (0.0, 0.0, 0.0, 0);
            for ((f, mean), p) in truth.iter().zip(&eval.means).zip(&eval.powers) {
                let err = f - mean;
                let half = q * (s2 * p).sqrt();
                let ratio = pointwise_ratio(err, half);
                if ratio.is_infinite() {
                    infinite += 1;
                } else {
                    ratio2 += ratio * ratio;
                }
                err2 += err * err;
                width2 += half * half;
            }
            Ok(Replicate { err2: err2 / m, ratio2: ratio2 / m, width2: width2 / m, infinite })
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::with_capacity(alphas.len() * config.n_list.len());
    for (chunk, (a, j)) in reps
        .chunks(config.replicates)
        .zip((0..alphas.len()).flat_map(|a| (0..config.n_list.len()).map(move |j| (a, j))))
    {
        let col = |f: fn(&Replicate) -> f64| chunk.iter().map(f).collect::<Vec<f64>>();
        let (mean_err2, se_err2) = mean_se(&col(|r| r.err2));
        let (mean_ratio2, se_ratio2) = mean_se(&col(|r| r.ratio2));
        let (mean_width2, se_width2) = mean_se(&col(|r| r.width2));
        cells.push(StochasticCell {
            alpha: alphas[a],
            n: config.n_list[j],
            replicates: chunk.len(),
            mean_err2,
            se_err2,
            mean_ratio2,
            se_ratio2,
            mean_width2,
            se_width2,
            infinite_ratio_count: chunk.iter().map(|r| r.infinite).sum(),
        });
    }
    Ok(StochasticResult {
        config: config.clone(),
        alphas,
        target_native_norm_sq: norm_sq,
        target_scale,
        cells,
    })
}

impl StochasticResult {
    pub fn cells_for(&self, alpha_index: usize) -> &[StochasticCell] {
        let k = self.config.n_list.len();
        &self.cells[alpha_index * k..(alpha_index + 1) * k]
    }

    pub fn trends(&self) -> Vec<AlphaTrend> {
        (0..self.alphas.len())
            .map(|a| {
                let cells = self.cells_for(a);
                let ns: Vec<f64> = cells.iter().map(|c| c.n as f64).collect();
                let fit = |v: Vec<f64>| loglog_slope(&ns, &v).ok();
                AlphaTrend {
                    alpha: self.alphas[a],
                    err2_fit: fit(cells.iter().map(|c| c.mean_err2).collect()),
                    ratio2_fit: fit(cells.iter().map(|c| c.mean_ratio2).collect()),
                }
            })
            .collect()
    }

    /// `−2ν/(2ν+d)`, the optimal decay exponent of the squared `L₂` error.
    pub fn optimal_rate(&self) -> f64 {
        let nu = self.config.kernel.sobolev_order();
        let d = self.config.kernel.dim() as f64;
        -2.0 * nu / (2.0 * nu + d)
    }

    pub fn summary(&self) -> StochasticSummary {
        let optimal_alpha = self.config.optimal_alpha();
        let trends = self.trends();
        let find = |alpha: f64| self.alphas.iter().position(|a| (a - alpha).abs() < 1e-12);
        let star = find(optimal_alpha);
        let zero = find(0.0);
        let high = self
            .alphas
            .iter()
            .enumerate()
            .filter(|(_, a)| **a > optimal_alpha + 1e-12)
            .max_by(|x, y| x.1.total_cmp(y.1))
            .map(|(i, _)| i);
        let last = self.config.n_list.len() - 1;
        let err_at_last = |a: usize| self.cells_for(a)[last].mean_err2;
        let slope = |a: usize| trends[a].err2_fit.map(|f| f.slope);
        let ratios = |a: usize| self.cells_for(a).iter().map(|c| c.mean_ratio2).collect::<Vec<f64>>();
        let rate = self.optimal_rate();

        let checks = StochasticChecks {
            optimal_alpha_best_at_largest_n: star
                .map(|s| (0..self.alphas.len()).all(|a| a == s || err_at_last(s) < err_at_last(a))),
            optimal_alpha_rate: star.and_then(slope).map(|s| (s - rate).abs() <= 0.25),
            high_alpha_slower: match (star.and_then(slope), high.and_then(slope)) {
                (Some(s), Some(h)) => Some(h >= s + 0.1),
                _ => None,
            },
            high_alpha_ratio_increasing: high.map(|h| ratios(h).windows(2).all(|w| w[1] > w[0])),
            zero_alpha_ratio_bounded: zero.map(|z| {
                let r = ratios(z);
                let (lo, hi) = r.iter().fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
                lo > 0.0 && hi / lo <= 2.0
            }),
        };
        StochasticSummary {
            optimal_alpha,
            optimal_rate: rate,
            target_native_norm_sq: self.target_native_norm_sq,
            trends,
            infinite_ratio_count: self.cells.iter().map(|c| c.infinite_ratio_count).sum(),
            checks,
        }
    }

    /// `config.json`, `stochastic.csv` and `summary.json`.
    pub fn to_bundle(&self) -> Result<OutputBundle> {
        let mut b = OutputBundle::default();
        b.push("config.json", self.config.to_json_pretty()? + "\n");
        b.push(
            "stochastic.csv",
            csv_bytes(|w| {
                w.write_record([
                    "alpha",
                    "n",
                    "replicates",
                    "mean_err2",
                    "se_err2",
                    "mean_ratio2",
                    "se_ratio2",
                    "mean_width2",
                    "se_width2",
                    "infinite_ratio_count",
                ])?;
                for c in &self.cells {
                    w.write_record([
                        c.alpha.to_string(),
                        c.n.to_string(),
                        c.replicates.to_string(),
                        c.mean_err2.to_string(),
                        c.se_err2.to_string(),
                        c.mean_ratio2.to_string(),
                        c.se_ratio2.to_string(),
                        c.mean_width2.to_string(),
                        c.se_width2.to_string(),
                        c.infinite_ratio_count.to_string(),
                    ])?;
                }
                Ok(())
            })?,
        );
        b.push("summary.json", serde_json::to_string_pretty(&self.summary())? + "\n");
        Ok(b)
    }
}
