//! Simple (zero-mean) kriging with an optional imposed regularization
//! `μ̂ₙ`, the power function, three variance estimates and the resulting
//! pointwise confidence bands.

pub mod rkhs;
pub mod sampling;

use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::designs::{halton_points, Design};
use crate::error::{Error, Result};
use crate::kernels::special::two_sided_quantile;
use crate::kernels::{euclidean, KernelSpec};

pub use rkhs::{interpolation_residual_norm_sq, predictor_norm_sq, rkhs_function_from_coefficients, RkhsFunction};
pub use sampling::{sample_gp_path, GpSampler};

/// Slack below zero tolerated (and clamped) in `1 - r'(R+μI)^{-1}r`.
pub const POWER_CLAMP: f64 = 1e-8;

/// Number of Halton probes used by [`FittedModel::default_probes`].
pub const DEFAULT_PROBE_COUNT: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum MuMode {
    /// Interpolation, `μ̂ₙ = 0`.
    Zero,
    /// `μ̂ₙ = c·n^α`.
    PowerLaw { c: f64, alpha: f64 },
}

impl MuMode {
    pub fn validate(&self) -> Result<()> {
        if let MuMode::PowerLaw { c, alpha } = *self {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::param(format!("regularization constant c must be positive, got {c}")));
            }
            if !(alpha.is_finite() && alpha < 1.0) {
                return Err(Error::param(format!("alpha must be finite and below 1, got {alpha}")));
            }
        }
        Ok(())
    }

    pub fn value(&self, n: usize) -> f64 {
        match *self {
            MuMode::Zero => 0.0,
            MuMode::PowerLaw { c, alpha } => c * (n as f64).powf(alpha),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Sigma2Mode {
    /// Maximum-likelihood scale `Y'(R+μ̂I)^{-1}Y / n`.
    MleScaled,
    /// A fixed value supplied by the caller.
    Constant { value: f64 },
    /// `Y'(R+μ̂I)^{-1}Y`, the squared native norm of the interpolant when `μ̂ = 0`.
    Unscaled,
}

impl Sigma2Mode {
    pub fn validate(&self) -> Result<()> {
        if let Sigma2Mode::Constant { value } = *self {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::param(format!("constant sigma2 must be positive, got {value}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub mu_mode: MuMode,
    pub sigma2_mode: Sigma2Mode,
    pub beta: f64,
    pub jitter: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            mu_mode: MuMode::Zero,
            sigma2_mode: Sigma2Mode::MleScaled,
            beta: 0.05,
            jitter: 1e-8,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        self.mu_mode.validate()?;
        self.sigma2_mode.validate()?;
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::param(format!("beta must lie in (0,1), got {}", self.beta)));
        }
        if !(self.jitter.is_finite() && self.jitter >= 0.0) {
            return Err(Error::param(format!("jitter must be nonnegative, got {}", self.jitter)));
        }
        Ok(())
    }

    pub fn jitter_policy(&self) -> JitterPolicy {
        JitterPolicy { initial: self.jitter, ..JitterPolicy::default() }
    }
}

/// Diagonal jitter escalation: `initial`, then ×10 until `max`.
/// A zero initial value escalates to `1e-8` first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterPolicy {
    pub initial: f64,
    pub max: f64,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        JitterPolicy { initial: 1e-8, max: 1e-4 }
    }
}

/// `R = (Ψ(‖x_j − x_k‖))_{jk}`, filled symmetrically.
pub fn build_correlation_matrix(points: &[Vec<f64>], kernel: &KernelSpec) -> DMatrix<f64> {
    let n = points.len();
    let mut r = DMatrix::<f64>::identity(n, n);
    for j in 0..n {
        for k in (j + 1)..n {
            let v = kernel.between(&points[j], &points[k]);
            r[(j, k)] = v;
            r[(k, j)] = v;
        }
    }
    r
}

/// `(Ψ(‖a_i − b_j‖))_{ij}`, an `|a| × |b|` matrix.
pub fn cross_correlation(a: &[Vec<f64>], b: &[Vec<f64>], kernel: &KernelSpec) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| kernel.between(&a[i], &b[j]))
}

/// Cholesky factorization of `R + (μ̂ + jitter) I` under `policy`.
/// Returns the factor and the jitter that made it succeed.
pub fn factorize(
    r: &DMatrix<f64>,
    mu_hat: f64,
    policy: JitterPolicy,
) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let n = r.nrows();
    if n != r.ncols() {
        return Err(Error::Shape(format!("correlation matrix is {}x{}", n, r.ncols())));
    }
    let mut jitter = policy.initial;
    loop {
        let mut shifted = r.clone();
        for i in 0..n {
            shifted[(i, i)] += mu_hat + jitter;
        }
        if let Some(chol) = Cholesky::new(shifted) {
            return Ok((chol, jitter));
        }
        let next = if jitter == 0.0 { 1e-8 } else { jitter * 10.0 };
        if next > policy.max * (1.0 + 1e-9) {
            return Err(Error::Conditioning { size: n, jitter });
        }
        jitter = next;
    }
}

/// `b − (R + shift·I) x`, each entry accumulated with a compensated dot
/// product so it stays accurate when far below the rounding level of `b`.
fn shifted_residual(r: &DMatrix<f64>, shift: f64, x: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = b.len();
    DVector::from_fn(n, |i, _| {
        let (mut s, mut c) = (b[i], 0.0);
        for k in 0..n {
            let a = if k == i { r[(i, i)] + shift } else { r[(i, k)] };
            let p = -a * x[k];
            let pe = (-a).mul_add(x[k], -p);
            let t = s + p;
            let z = t - s;
            c += (s - (t - z)) + (p - z) + pe;
            s = t;
        }
        s + c
    })
}

/// Cholesky solve followed by iterative refinement. On an ill-conditioned
/// system the plain solve loses about `cond·ε` in the weights; a few
/// correction steps with an accurate residual recover most of it.
fn refined_solve(chol: &Cholesky<f64, Dyn>, r: &DMatrix<f64>, shift: f64, y: &DVector<f64>) -> DVector<f64> {
    let mut x = chol.solve(y);
    let mut last = f64::INFINITY;
    for _ in 0..3 {
        let dx = chol.solve(&shifted_residual(r, shift, &x, y));
        let size = dx.amax();
        // stop once corrections no longer shrink
        if !(size < last) {
            break;
        }
        x += dx;
        if size <= f64::EPSILON * x.amax() {
            break;
        }
        last = size;
    }
    x
}

/// Predictor means and power-function values at a batch of points.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub points: Vec<Vec<f64>>,
    pub means: Vec<f64>,
    pub powers: Vec<f64>,
}

/// A fitted kriging model. Immutable once built.
#[derive(Debug, Clone)]
pub struct FittedModel {
    design: Design,
    y: DVector<f64>,
    kernel: KernelSpec,
    config: FitConfig,
    mu_hat: f64,
    jitter_used: f64,
    chol: Cholesky<f64, Dyn>,
    dual_weights: DVector<f64>,
    quadratic_form: f64,
    sigma2_hat: f64,
    quantile: f64,
}

/// Fits the model `f̂(x) = r(x)'(R + μ̂I)^{-1}Y`.
pub fn fit(design: &Design, y: &[f64], kernel: &KernelSpec, config: &FitConfig) -> Result<FittedModel> {
    kernel.validate()?;
    config.validate()?;
    if kernel.dim() != design.dim() {
        return Err(Error::Shape(format!(
            "kernel dimension {} does not match design dimension {}",
            kernel.dim(),
            design.dim()
        )));
    }
    let n = design.len();
    if y.len() != n {
        return Err(Error::input(format!("{} observations for {n} design points", y.len())));
    }
    if let Some(v) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::input(format!("observation {v} is not finite")));
    }
    let mu_hat = config.mu_mode.value(n);
    let r = build_correlation_matrix(design.points(), kernel);
    let (chol, jitter_used) = factorize(&r, mu_hat, config.jitter_policy())?;
    let y = DVector::from_column_slice(y);
    let dual_weights = refined_solve(&chol, &r, mu_hat + jitter_used, &y);
    let quadratic_form = y.dot(&dual_weights).max(0.0);
    let mut model = FittedModel {
        design: design.clone(),
        y,
        kernel: *kernel,
        config: *config,
        mu_hat,
        jitter_used,
        chol,
        dual_weights,
        quadratic_form,
        sigma2_hat: 0.0,
        quantile: two_sided_quantile(config.beta)?,
    };
    model.sigma2_hat = model.sigma2_for(config.sigma2_mode);
    Ok(model)
}

impl FittedModel {
    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn y(&self) -> &[f64] {
        self.y.as_slice()
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn config(&self) -> &FitConfig {
        &self.config
    }

    pub fn mu_hat(&self) -> f64 {
        self.mu_hat
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    pub fn dual_weights(&self) -> &[f64] {
        self.dual_weights.as_slice()
    }

    /// Lower Cholesky factor of `R + (μ̂ + jitter) I`.
    pub fn lower_factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// Variance estimate for the configured mode.
    pub fn sigma2_hat(&self) -> f64 {
        self.sigma2_hat
    }

    /// Critical value `q_{1-β/2}`.
    pub fn quantile(&self) -> f64 {
        self.quantile
    }

    /// Variance estimate the band would use under `mode`.
    pub fn sigma2_for(&self, mode: Sigma2Mode) -> f64 {
        match mode {
            Sigma2Mode::MleScaled => self.quadratic_form / self.design.len() as f64,
            Sigma2Mode::Constant { value } => value,
            Sigma2Mode::Unscaled => self.quadratic_form,
        }
    }

    /// `‖I_{Ψ,X} f‖²_N = Y'R^{-1}Y`; only meaningful for interpolation.
    pub fn native_norm_sq_of_interpolant(&self) -> Result<f64> {
        if self.mu_hat > 0.0 {
            return Err(Error::Mode(format!(
                "native norm of the interpolant needs mu_hat = 0, model has {}",
                self.mu_hat
            )));
        }
        Ok(self.quadratic_form)
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.design.dim() {
            return Err(Error::Shape(format!(
                "point has {} coordinates, model dimension is {}",
                x.len(),
                self.design.dim()
            )));
        }
        if x.iter().any(|c| !c.is_finite()) {
            return Err(Error::input("evaluation point has a non-finite coordinate"));
        }
        Ok(())
    }

    fn correlations_to(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.design.len(),
            self.design.points().iter().map(|p| self.kernel.between(x, p)),
        )
    }

    pub fn predict_mean(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.correlations_to(x).dot(&self.dual_weights))
    }

    /// Squared power function `1 − r(x)'(R + μ̂I)^{-1} r(x)`.
    pub fn power_function(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let mut v = self.correlations_to(x);
        self.chol.l_dirty().solve_lower_triangular_mut(&mut v);
        self.clamp_power(1.0 - v.norm_squared())
    }

    fn clamp_power(&self, p: f64) -> Result<f64> {
        if p >= 0.0 {
            Ok(p.min(1.0))
        } else if p >= -POWER_CLAMP {
            Ok(0.0)
        } else {
            Err(Error::NegativePower { value: p, size: self.design.len() })
        }
    }

    /// Means and squared power at many points with one triangular solve.
    pub fn evaluate(&self, points: &[Vec<f64>]) -> Result<Evaluation> {
        for x in points {
            self.check_point(x)?;
        }
        let cross = cross_correlation(self.design.points(), points, &self.kernel);
        let means = (cross.transpose() * &self.dual_weights).as_slice().to_vec();
        let mut v = cross;
        self.chol.l_dirty().solve_lower_triangular_mut(&mut v);
        let powers = v
            .column_iter()
            .map(|c| self.clamp_power(1.0 - c.norm_squared()))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Evaluation { points: points.to_vec(), means, powers })
    }

    pub fn predict_means(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        for x in points {
            self.check_point(x)?;
        }
        let cross = cross_correlation(self.design.points(), points, &self.kernel);
        Ok((cross.transpose() * &self.dual_weights).as_slice().to_vec())
    }

    /// `max_x P(x)` over `probes` (a lower bound for the supremum over Ω).
    pub fn sup_power(&self, probes: &[Vec<f64>]) -> Result<f64> {
        if probes.is_empty() {
            return Err(Error::input("sup_power needs at least one probe"));
        }
        let eval = self.evaluate(probes)?;
        Ok(eval.powers.iter().fold(0.0f64, |m, p| m.max(p.sqrt())))
    }

    /// 512 Halton points plus design midpoints.
    pub fn default_probes(&self) -> Result<Vec<Vec<f64>>> {
        default_probes(&self.design)
    }

    /// Confidence band for the configured variance mode.
    pub fn confidence_band(&self, points: &[Vec<f64>]) -> Result<PredictionBand> {
        self.confidence_band_with(points, self.config.sigma2_mode)
    }

    pub fn confidence_band_with(&self, points: &[Vec<f64>], mode: Sigma2Mode) -> Result<PredictionBand> {
        mode.validate()?;
        let eval = self.evaluate(points)?;
        Ok(PredictionBand::assemble(eval, self.sigma2_for(mode), self.quantile))
    }
}

/// Halton probes plus midpoints: between sorted neighbours for `d = 1`,
/// between each point and its nearest neighbour otherwise.
pub fn default_probes(design: &Design) -> Result<Vec<Vec<f64>>> {
    let mut probes = halton_points(DEFAULT_PROBE_COUNT, design.dim())?;
    let pts = design.points();
    if design.dim() == 1 {
        let mut xs: Vec<f64> = pts.iter().map(|p| p[0]).collect();
        xs.sort_by(f64::total_cmp);
        probes.extend(xs.windows(2).map(|w| vec![0.5 * (w[0] + w[1])]));
    } else if pts.len() > 1 {
        for (i, p) in pts.iter().enumerate() {
            let nearest = pts
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .min_by(|a, b| euclidean(p, a.1).total_cmp(&euclidean(p, b.1)))
                .map(|(_, q)| q)
                .expect("at least two points");
            probes.push(p.iter().zip(nearest).map(|(a, b)| 0.5 * (a + b)).collect());
        }
    }
    Ok(probes)
}

/// Pointwise means, half-widths `q·sqrt(σ̂²·P²)` and squared power values.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionBand {
    pub points: Vec<Vec<f64>>,
    pub means: Vec<f64>,
    pub half_widths: Vec<f64>,
    pub powers: Vec<f64>,
    pub sigma2: f64,
    pub quantile: f64,
}

impl PredictionBand {
    pub fn assemble(eval: Evaluation, sigma2: f64, quantile: f64) -> Self {
        let half_widths = eval.powers.iter().map(|p| quantile * (sigma2 * p).sqrt()).collect();
        PredictionBand {
            points: eval.points,
            means: eval.means,
            half_widths,
            powers: eval.powers,
            sigma2,
            quantile,
        }
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn lo(&self, i: usize) -> f64 {
        self.means[i] - self.half_widths[i]
    }

    pub fn hi(&self, i: usize) -> f64 {
        self.means[i] + self.half_widths[i]
    }

    /// CSV with header `x,mean,lo,hi,power` (`x1,x2,...` when `d > 1`).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let dim = self.points.first().map_or(1, Vec::len);
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = if dim == 1 {
            vec!["x".into()]
        } else {
            (1..=dim).map(|k| format!("x{k}")).collect()
        };
        header.extend(["mean", "lo", "hi", "power"].map(String::from));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self.points[i].iter().map(|c| c.to_string()).collect();
            row.push(self.means[i].to_string());
            row.push(self.lo(i).to_string());
            row.push(self.hi(i).to_string());
            row.push(self.powers[i].to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
