//! Exact draws of `Z ~ GP(0, σ²Ψ)` at a finite point set.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{build_correlation_matrix, factorize, JitterPolicy};
use crate::designs::{Design, DesignKind};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

/// Holds `σ L` with `L L' = R + jitter·I`; each draw is `σ L ξ`.
#[derive(Debug, Clone)]
pub struct GpSampler {
    scaled_factor: DMatrix<f64>,
    jitter_used: f64,
}

impl GpSampler {
    pub fn new(points: &[Vec<f64>], kernel: &KernelSpec, sigma2: f64, policy: JitterPolicy) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::param(format!("sigma2 must be positive, got {sigma2}")));
        }
        kernel.validate()?;
        Design::new(points.to_vec(), DesignKind::Custom)?;
        let r = build_correlation_matrix(points, kernel);
        let (chol, jitter_used) = factorize(&r, 0.0, policy)?;
        Ok(GpSampler { scaled_factor: chol.l() * sigma2.sqrt(), jitter_used })
    }

    pub fn len(&self) -> usize {
        self.scaled_factor.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Jitter added to the correlation matrix; the sampled covariance is
    /// `σ²(R + jitter·I)`.
    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let xi = DVector::from_iterator(self.len(), (0..self.len()).map(|_| rng.sample::<f64, _>(StandardNormal)));
        (&self.scaled_factor * xi).as_slice().to_vec()
    }
}

/// One joint draw at `points`, deterministic in `seed`.
pub fn sample_gp_path(points: &[Vec<f64>], kernel: &KernelSpec, sigma2: f64, seed: u64) -> Result<Vec<f64>> {
    let sampler = GpSampler::new(points, kernel, sigma2, JitterPolicy::default())?;
    Ok(sampler.sample(&mut ChaCha8Rng::seed_from_u64(seed)))
}
