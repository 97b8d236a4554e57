//! Target functions, the reference norm constant and seed derivation.

use std::f64::consts::PI;

use nalgebra::DVector;

use crate::designs::{grid_design, Design};
use crate::error::{Error, Result};
use crate::gp::{build_correlation_matrix, factorize, JitterPolicy};
use crate::kernels::KernelSpec;

/// Cauchy density `1 / (π s (1 + ((x − m)/s)²))`.
pub fn cauchy_density(x: f64, location: f64, spread: f64) -> Result<f64> {
    if !(spread.is_finite() && spread > 0.0) {
        return Err(Error::param(format!("Cauchy spread must be positive, got {spread}")));
    }
    let z = (x - location) / spread;
    Ok(1.0 / (PI * spread * (1.0 + z * z)))
}

/// `sin(4x) − 0.02·t₁(x; 1.57, 0.05)`: smooth with a sharp dip just
/// outside the right end of `[0, 1]`.
pub fn test_function_gramacy(x: f64) -> f64 {
    let z = (x - 1.57) / 0.05;
    (4.0 * x).sin() - 0.02 / (PI * 0.05 * (1.0 + z * z))
}

/// `C = 2 Ỹ'R̃^{-1}Ỹ` with `Ỹ = f` on an `m`-point grid of `[0,1]`
/// (twice the squared native norm of the fine-grid interpolant).
pub fn estimate_reference_norm_constant(
    f: impl Fn(f64) -> f64,
    kernel: &KernelSpec,
    m_points: usize,
    policy: JitterPolicy,
) -> Result<f64> {
    if m_points < 2 {
        return Err(Error::param(format!("reference grid needs at least 2 points, got {m_points}")));
    }
    if kernel.dim() != 1 {
        return Err(Error::Shape("reference norm constant is defined on [0,1] only".into()));
    }
    estimate_reference_norm_constant_on(f, kernel, &grid_design(m_points, 1)?, policy)
}

/// As [`estimate_reference_norm_constant`], on a caller-supplied 1-d grid.
pub fn estimate_reference_norm_constant_on(
    f: impl Fn(f64) -> f64,
    kernel: &KernelSpec,
    grid: &Design,
    policy: JitterPolicy,
) -> Result<f64> {
    if kernel.dim() != 1 || grid.dim() != 1 {
        return Err(Error::Shape("reference norm constant is defined on [0,1] only".into()));
    }
    let y = DVector::from_iterator(grid.len(), grid.points().iter().map(|p| f(p[0])));
    if y.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let r = build_correlation_matrix(grid.points(), kernel);
    let (chol, _) = factorize(&r, 0.0, policy)?;
    Ok(2.0 * y.dot(&chol.solve(&y)).max(0.0))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent per-cell seed from a master seed and a cell key.
pub fn derive_seed(master: u64, key: &[u64]) -> u64 {
    key.iter().fold(splitmix64(master), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}
