//! Stationary correlation functions on `[0,1]^d`.
//!
//! The Matérn family is used in its reparametrized form with the scale
//! absorbed into the distance,
//! `Ψ(r) = r^ν̃ K_ν̃(r) / (Γ(ν̃) 2^{ν̃-1})` with `ν̃ = ν - d/2`, so that its
//! native space is the Sobolev space `H^ν`.

pub mod bessel;
pub mod special;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use bessel::{bessel_k_unchecked, half_integer_index};
use special::{beta, gamma, integrate_adaptive};

/// Below this distance the Matérn correlation is returned as exactly 1.
pub const SMALL_LAG: f64 = 1e-10;

const GW_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    Matern {
        nu: f64,
        dim: usize,
    },
    #[serde(alias = "wendland")]
    GeneralizedWendland {
        kappa: f64,
        mu_gw: f64,
        dim: usize,
    },
}

impl KernelSpec {
    pub fn matern(nu: f64, dim: usize) -> Result<Self> {
        let spec = KernelSpec::Matern { nu, dim };
        spec.validate()?;
        Ok(spec)
    }

    pub fn generalized_wendland(kappa: f64, mu_gw: f64, dim: usize) -> Result<Self> {
        let spec = KernelSpec::GeneralizedWendland { kappa, mu_gw, dim };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Matern { nu, dim } => {
                if dim == 0 {
                    return Err(Error::param("dimension must be positive"));
                }
                let half_d = dim as f64 / 2.0;
                if !nu.is_finite() || nu <= half_d {
                    return Err(Error::param(format!(
                        "Matérn smoothness nu must exceed d/2 = {half_d}, got {nu}"
                    )));
                }
            }
            KernelSpec::GeneralizedWendland { kappa, mu_gw, dim } => {
                if dim == 0 {
                    return Err(Error::param("dimension must be positive"));
                }
                if !kappa.is_finite() || kappa <= 0.0 {
                    return Err(Error::param(format!(
                        "Wendland kappa must be positive, got {kappa}"
                    )));
                }
                let floor = (dim as f64 + 1.0) / 2.0 + kappa;
                if !mu_gw.is_finite() || mu_gw < floor {
                    return Err(Error::param(format!(
                        "Wendland mu_gw must be at least (d+1)/2 + kappa = {floor}, got {mu_gw}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match *self {
            KernelSpec::Matern { dim, .. } | KernelSpec::GeneralizedWendland { dim, .. } => dim,
        }
    }

    /// Sobolev order `ν` of the native space.
    pub fn sobolev_order(&self) -> f64 {
        match *self {
            KernelSpec::Matern { nu, .. } => nu,
            KernelSpec::GeneralizedWendland { kappa, dim, .. } => (dim as f64 + 1.0) / 2.0 + kappa,
        }
    }

    /// Correlation at distance `r`, with argument checks.
    pub fn correlation(&self, r: f64) -> Result<f64> {
        check_lag(r)?;
        self.validate()?;
        Ok(self.correlation_unchecked(r))
    }

    /// Correlation at distance `r` for an already validated spec and `r ≥ 0`.
    pub fn correlation_unchecked(&self, r: f64) -> f64 {
        match *self {
            KernelSpec::Matern { nu, dim } => matern_value(nu - dim as f64 / 2.0, r),
            KernelSpec::GeneralizedWendland { kappa, mu_gw, .. } => wendland_value(kappa, mu_gw, r),
        }
    }

    /// Correlation between two points of this kernel's dimension.
    pub fn between(&self, a: &[f64], b: &[f64]) -> f64 {
        self.correlation_unchecked(euclidean(a, b))
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    if a.len() == 1 {
        return (a[0] - b[0]).abs();
    }
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_lag(r: f64) -> Result<()> {
    if r.is_nan() || r < 0.0 {
        return Err(Error::input(format!("distance must be a nonnegative number, got {r}")));
    }
    Ok(())
}

fn matern_value(order: f64, r: f64) -> f64 {
    if r < SMALL_LAG {
        return 1.0;
    }
    if r.is_infinite() {
        return 0.0;
    }
    if let Some(m) = half_integer_index(order) {
        return matern_half_integer(m, r);
    }
    let k = bessel_k_unchecked(order, r);
    let v = r.powf(order) * k / (gamma(order) * 2f64.powf(order - 1.0));
    v.min(1.0)
}

/// `Ψ = e^{-r} (2^m m!/(2m)!) Σ_k (m+k)!/(k!(m-k)!) 2^{-k} r^{m-k}` for `ν̃ = m + 1/2`.
fn matern_half_integer(m: usize, r: f64) -> f64 {
    // coefficient of r^{m-k}, starting from k = m (constant term, equals 1
    // after the prefactor) and walking down to k = 0
    let mut coef = 1.0;
    let mut sum = 1.0;
    let mut rpow = 1.0;
    for k in (0..m).rev() {
        // a_k / a_{k+1} with a_k = (m+k)!/(k!(m-k)!) 2^{-k}
        let kf = k as f64;
        let mf = m as f64;
        coef *= 2.0 * (kf + 1.0) / ((mf + kf + 1.0) * (mf - kf));
        rpow *= r;
        sum += coef * rpow;
    }
    (-r).exp() * sum
}

/// Matérn correlation `Ψ(r)`.
pub fn matern_corr(r: f64, spec: &KernelSpec) -> Result<f64> {
    check_lag(r)?;
    match spec {
        KernelSpec::Matern { .. } => spec.correlation(r),
        _ => Err(Error::param("matern_corr called with a non-Matérn spec")),
    }
}

fn wendland_value(kappa: f64, mu: f64, r: f64) -> f64 {
    if r == 0.0 {
        return 1.0;
    }
    if r >= 1.0 {
        return 0.0;
    }
    let norm = beta(2.0 * kappa, mu + 1.0);
    let integral = if kappa >= 1.0 {
        integrate_adaptive(
            |u| u * (u * u - r * r).powf(kappa - 1.0) * (1.0 - u).powf(mu),
            r,
            1.0,
            GW_TOL * norm,
        )
    } else {
        // u = r + (1-r) s^{1/κ} removes the (u-r)^{κ-1} endpoint singularity
        let scale = (1.0 - r).powf(kappa) / kappa;
        scale
            * integrate_adaptive(
                |s| {
                    let u = r + (1.0 - r) * s.powf(1.0 / kappa);
                    u * (u + r).powf(kappa - 1.0) * (1.0 - u).powf(mu)
                },
                0.0,
                1.0,
                GW_TOL * norm / scale.max(f64::MIN_POSITIVE),
            )
    };
    (integral / norm).clamp(0.0, 1.0)
}

/// Generalized Wendland correlation, compactly supported on `[0, 1)`.
pub fn generalized_wendland_corr(r: f64, spec: &KernelSpec) -> Result<f64> {
    check_lag(r)?;
    match spec {
        KernelSpec::GeneralizedWendland { .. } => spec.correlation(r),
        _ => Err(Error::param(
            "generalized_wendland_corr called with a non-Wendland spec",
        )),
    }
}

/// Spectral density of the reparametrized Matérn kernel at frequency
/// magnitude `w`: `π^{-d/2} Γ(ν)/Γ(ν̃) (1+w²)^{-ν}`.
pub fn matern_spectral_density(w: f64, spec: &KernelSpec) -> Result<f64> {
    check_lag(w)?;
    match *spec {
        KernelSpec::Matern { nu, dim } => {
            spec.validate()?;
            let d = dim as f64;
            let order = nu - d / 2.0;
            let log_c = -0.5 * d * std::f64::consts::PI.ln() + special::ln_gamma(nu)
                - special::ln_gamma(order);
            Ok((log_c - nu * (1.0 + w * w).ln()).exp())
        }
        _ => Err(Error::param("spectral density is only available for Matérn")),
    }
}
