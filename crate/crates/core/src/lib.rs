//! Kriging (Gaussian-process) emulation with explicit control over the
//! variance estimate used for confidence bands, plus the diagnostics needed
//! to check whether those bands are reliable for a fixed target function.
//!
//! The crate is organised bottom-up:
//!
//! * [`kernels`]: Matérn and generalized Wendland correlations, Bessel K,
//!   normal quantiles.
//! * [`designs`]: grid, Halton and uniform random designs with fill distance
//!   and separation radius.
//! * [`gp`]: correlation matrices, jittered Cholesky, predictor, power
//!   function, the three variance estimates and confidence bands.
//! * [`extended`]: a double-double, jitter-free power function for the regime
//!   where `1 - r'R^{-1}r` is below `f64` resolution.
//! * [`reliability`]: error/width ratio metric, coverage, log-log rates.
//! * [`experiments`]: the deterministic, stochastic and GP-baseline studies.

pub mod designs;
pub mod error;
pub mod experiments;
pub mod extended;
pub mod gp;
pub mod kernels;
pub mod reliability;

pub use designs::{Design, DesignKind};
pub use error::{Error, Result};
pub use gp::{FitConfig, FittedModel, MuMode, PredictionBand, Sigma2Mode};
pub use kernels::KernelSpec;
pub use reliability::{Exponent, ReliabilityReport};
