//! Functions in the span of kernel translates, whose native norm is known
//! in closed form: `f = Σ c_i Ψ(· − z_i)`, `‖f‖² = c'R_z c`.

use nalgebra::DVector;

use super::{build_correlation_matrix, cross_correlation, FittedModel};
use crate::designs::Design;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

#[derive(Debug, Clone)]
pub struct RkhsFunction {
    centers: Vec<Vec<f64>>,
    coeffs: DVector<f64>,
    kernel: KernelSpec,
    norm_sq: f64,
}

pub fn rkhs_function_from_coefficients(
    centers: &[Vec<f64>],
    coeffs: &[f64],
    kernel: &KernelSpec,
) -> Result<RkhsFunction> {
    kernel.validate()?;
    if centers.len() != coeffs.len() {
        return Err(Error::input(format!(
            "{} centers but {} coefficients",
            centers.len(),
            coeffs.len()
        )));
    }
    if !centers.is_empty() {
        // reuses the distinctness and range checks
        let design = Design::new(centers.to_vec(), crate::DesignKind::Custom)?;
        if design.dim() != kernel.dim() {
            return Err(Error::Shape("center dimension does not match the kernel".into()));
        }
    }
    let coeffs = DVector::from_column_slice(coeffs);
    let rz = build_correlation_matrix(centers, kernel);
    let norm_sq = (&rz * &coeffs).dot(&coeffs).max(0.0);
    Ok(RkhsFunction { centers: centers.to_vec(), coeffs, kernel: *kernel, norm_sq })
}

impl RkhsFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.centers
            .iter()
            .zip(self.coeffs.iter())
            .map(|(z, c)| c * self.kernel.between(x, z))
            .sum()
    }

    pub fn eval_many(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        xs.iter().map(|x| self.eval(x)).collect()
    }

    /// Exact squared native norm `c'R_z c`.
    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn coeffs(&self) -> &[f64] {
        self.coeffs.as_slice()
    }
}

/// `‖f − f̂‖²_N` for the model's predictor `f̂ = Σ w_j Ψ(· − x_j)`, expanded as
/// `c'R_z c − 2 c'R_{zX} w + w'R_X w` (all correlation matrices unjittered).
pub fn interpolation_residual_norm_sq(f: &RkhsFunction, model: &FittedModel) -> f64 {
    let x = model.design().points();
    let w = DVector::from_column_slice(model.dual_weights());
    let rzx = cross_correlation(&f.centers, x, &f.kernel);
    let rx = build_correlation_matrix(x, &f.kernel);
    let cross = (&rzx * &w).dot(&f.coeffs);
    let interp = (&rx * &w).dot(&w);
    f.norm_sq - 2.0 * cross + interp
}

/// `‖f̂‖²_N = w'R_X w` for the model's predictor.
pub fn predictor_norm_sq(model: &FittedModel) -> f64 {
    let w = DVector::from_column_slice(model.dual_weights());
    let rx = build_correlation_matrix(model.design().points(), model.kernel());
    (&rx * &w).dot(&w)
}
