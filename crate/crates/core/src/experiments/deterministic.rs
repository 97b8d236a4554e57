//! The fixed-function study: interpolate the test function on grids of
//! growing size and track how the ratio of error to band width behaves
//! under the three variance estimates.

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::functions::{estimate_reference_norm_constant_on, test_function_gramacy};
use super::output::{csv_bytes, OutputBundle};
use crate::error::{Error, Result};
use crate::gp::{fit, FitConfig, MuMode, PredictionBand, Sigma2Mode};
use crate::reliability::{ratio_metric, Exponent, LogLogFit, ReliabilityReport};

/// Slope window for the MLE-scaled rate, and its hard floor.
pub const PANEL2_SLOPE_RANGE: (f64, f64) = (1.3, 1.8);
pub const PANEL2_SLOPE_FLOOR: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterministicRow {
    pub n: usize,
    pub jitter_used: f64,
    pub sigma2_mle: f64,
    /// `E` under the MLE-scaled variance.
    pub e_mle: f64,
    /// Sup ratio under `σ̂² = C`.
    pub linf_constant: f64,
    /// Sup ratio under the unscaled variance.
    pub linf_unscaled: f64,
    pub infinite_ratios: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterministicChecks {
    pub panel2_slope_in_range: bool,
    pub panel2_slope_above_floor: bool,
    pub panel1_increasing: bool,
    pub panel1_inversions: usize,
    pub panel3_within_bound: bool,
    pub panel4_bounded: bool,
    pub panel4_no_upward_trend: bool,
    pub sigma2_decay: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterministicSummary {
    pub panel2_slope: Option<f64>,
    pub panel2_intercept: Option<f64>,
    pub panel2_r2: Option<f64>,
    pub panel4_slope: Option<f64>,
    pub reference_constant: f64,
    pub panel3_bound: f64,
    pub max_panel3_ratio: f64,
    pub max_panel4_ratio_n_ge_100: Option<f64>,
    pub max_sigma2_n_over_half_c: f64,
    pub infinite_ratio_count: usize,
    pub checks: DeterministicChecks,
}

#[derive(Debug, Clone)]
pub struct DeterministicResult {
    pub config: ExperimentConfig,
    pub reference_constant: f64,
    pub quantile: f64,
    pub rows: Vec<DeterministicRow>,
    pub panel1: ReliabilityReport,
    pub panel3: ReliabilityReport,
    pub panel4: ReliabilityReport,
    /// MLE-scaled band at the largest n.
    pub last_band: PredictionBand,
}

/// Number of adjacent decreases in a sequence.
pub fn adjacent_inversions(values: &[f64]) -> usize {
    values.windows(2).filter(|w| w[1] < w[0]).count()
}

pub fn run_deterministic_experiment(config: &ExperimentConfig) -> Result<DeterministicResult> {
    config.validate()?;
    if config.kernel.dim() != 1 {
        return Err(Error::config("kernel", "the deterministic study is defined on [0,1]"));
    }
    if config.noise_sd != 0.0 {
        return Err(Error::config("noise_sd", "the deterministic study needs noise_sd = 0"));
    }
    let kernel = config.kernel;
    let eval_points = config.eval.points(1)?;
    let truth: Vec<f64> = eval_points.iter().map(|x| test_function_gramacy(x[0])).collect();
    let reference_constant = estimate_reference_norm_constant_on(
        test_function_gramacy,
        &kernel,
        &config.grid(config.reference_points, 1)?,
        config.reference_jitter_policy(),
    )?;
    let constant_mode = Sigma2Mode::Constant { value: reference_constant };
    constant_mode.validate().map_err(|_| Error::config("reference_points", "reference constant is zero"))?;

    let fit_config = FitConfig {
        mu_mode: MuMode::Zero,
        sigma2_mode: Sigma2Mode::MleScaled,
        beta: config.beta,
        jitter: config.jitter,
    };
    let mut rows = Vec::with_capacity(config.n_list.len());
    let mut last = None;
    let mut quantile = 0.0;
    for &n in &config.n_list {
        let design = config.grid(n, 1)?;
        let y: Vec<f64> = design.points().iter().map(|x| test_function_gramacy(x[0])).collect();
        let model = fit(&design, &y, &kernel, &fit_config)?;
        quantile = model.quantile();
        let eval = model.evaluate(&eval_points)?;
        let band_of = |mode| PredictionBand::assemble(eval.clone(), model.sigma2_for(mode), quantile);
        let mle = band_of(Sigma2Mode::MleScaled);
        let constant = band_of(constant_mode);
        let unscaled = band_of(Sigma2Mode::Unscaled);
        let e = ratio_metric(&truth, &mle, config.p)?;
        let c_inf = ratio_metric(&truth, &constant, Exponent::Infinity)?;
        let u_inf = ratio_metric(&truth, &unscaled, Exponent::Infinity)?;
        rows.push(DeterministicRow {
            n,
            jitter_used: model.jitter_used(),
            sigma2_mle: model.sigma2_hat(),
            e_mle: e.value,
            linf_constant: c_inf.value,
            linf_unscaled: u_inf.value,
            infinite_ratios: e.infinite_count + c_inf.infinite_count + u_inf.infinite_count,
        });
        last = Some(mle);
    }
    let last_band = last.expect("n_list is nonempty");
    let last_ratios: Vec<f64> = truth
        .iter()
        .zip(&last_band.means)
        .zip(&last_band.half_widths)
        .map(|((f, m), h)| crate::reliability::pointwise_ratio(f - m, 2.0 * h))
        .collect();
    let infinite: usize = rows.iter().map(|r| r.infinite_ratios).sum();
    let report = |select: fn(&DeterministicRow) -> f64, p| {
        ReliabilityReport::new(p, rows.iter().map(|r| (r.n, select(r))).collect(), infinite, last_ratios.clone())
    };
    let panel1 = report(|r| r.e_mle, config.p);
    let panel3 = report(|r| r.linf_constant, Exponent::Infinity);
    let panel4 = report(|r| r.linf_unscaled, Exponent::Infinity);
    Ok(DeterministicResult {
        config: config.clone(),
        reference_constant,
        quantile,
        rows,
        panel1,
        panel3,
        panel4,
        last_band,
    })
}

impl DeterministicResult {
    pub fn panel2_fit(&self) -> Option<LogLogFit> {
        self.panel1.fit
    }

    /// `1/(2q)`, the bound on the sup ratio when `σ̂² ≥ ‖f‖²`.
    pub fn panel3_bound(&self) -> f64 {
        1.0 / (2.0 * self.quantile)
    }

    pub fn summary(&self) -> DeterministicSummary {
        let fit = self.panel2_fit();
        let slope = fit.map(|f| f.slope);
        let es: Vec<f64> = self.rows.iter().map(|r| r.e_mle).collect();
        let inversions = adjacent_inversions(&es);
        let bound = self.panel3_bound();
        let max3 = self.rows.iter().map(|r| r.linf_constant).fold(0.0, f64::max);
        let max4 = self.rows.iter().filter(|r| r.n >= 100).map(|r| r.linf_unscaled).reduce(f64::max);
        let half_c = self.reference_constant / 2.0;
        let sigma2_ratio = self.rows.iter().map(|r| r.sigma2_mle * r.n as f64 / half_c).fold(0.0, f64::max);
        let panel4_slope = self.panel4.fit.map(|f| f.slope);
        DeterministicSummary {
            panel2_slope: slope,
            panel2_intercept: fit.map(|f| f.intercept),
            panel2_r2: fit.map(|f| f.r2),
            panel4_slope,
            reference_constant: self.reference_constant,
            panel3_bound: bound,
            max_panel3_ratio: max3,
            max_panel4_ratio_n_ge_100: max4,
            max_sigma2_n_over_half_c: sigma2_ratio,
            infinite_ratio_count: self.panel1.infinite_ratio_count,
            checks: DeterministicChecks {
                panel2_slope_in_range: slope.is_some_and(|s| s >= PANEL2_SLOPE_RANGE.0 && s <= PANEL2_SLOPE_RANGE.1),
                panel2_slope_above_floor: slope.is_some_and(|s| s >= PANEL2_SLOPE_FLOOR),
                panel1_increasing: inversions <= 1,
                panel1_inversions: inversions,
                panel3_within_bound: max3 <= bound + 1e-6,
                panel4_bounded: max4.is_none_or(|m| m <= 1.0),
                panel4_no_upward_trend: panel4_slope.is_none_or(|s| s <= 0.1),
                sigma2_decay: sigma2_ratio <= 1.0 + 1e-6,
            },
        }
    }

    /// `config.json`, `panel1.csv` … `panel4.csv`, `sigma2.csv`,
    /// `band_last.csv` and `summary.json`.
    pub fn to_bundle(&self) -> Result<OutputBundle> {
        let mut b = OutputBundle::default();
        b.push("config.json", self.config.to_json_pretty()? + "\n");
        for (name, report) in [("panel1.csv", &self.panel1), ("panel3.csv", &self.panel3), ("panel4.csv", &self.panel4)] {
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            b.push(name, buf);
        }
        let fit = self.panel2_fit();
        b.push(
            "panel2.csv",
            csv_bytes(|w| {
                w.write_record(["n", "log_n", "log_E", "fitted_log_E"])?;
                for r in &self.rows {
                    let ln = (r.n as f64).ln();
                    let fitted = fit.map_or(f64::NAN, |f| f.intercept + f.slope * ln);
                    w.write_record([r.n.to_string(), ln.to_string(), r.e_mle.ln().to_string(), fitted.to_string()])?;
                }
                Ok(())
            })?,
        );
        let half_c = self.reference_constant / 2.0;
        b.push(
            "sigma2.csv",
            csv_bytes(|w| {
                w.write_record(["n", "sigma2_hat", "sigma2_times_n", "half_reference_constant", "jitter_used"])?;
                for r in &self.rows {
                    w.write_record([
                        r.n.to_string(),
                        r.sigma2_mle.to_string(),
                        (r.sigma2_mle * r.n as f64).to_string(),
                        half_c.to_string(),
                        r.jitter_used.to_string(),
                    ])?;
                }
                Ok(())
            })?,
        );
        let mut band = Vec::new();
        self.last_band.write_csv(&mut band)?;
        b.push("band_last.csv", band);
        b.push("summary.json", serde_json::to_string_pretty(&self.summary())? + "\n");
        Ok(b)
    }
}
