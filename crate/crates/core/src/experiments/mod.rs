//! The three studies: the fixed-function reproduction on grids, the noisy
//! α-sweep, and the well-specified GP baseline. Each returns a result value
//! that renders to an [`OutputBundle`] of CSV and JSON files.

mod baseline;
mod config;
mod deterministic;
mod functions;
mod output;
mod stochastic;

pub use baseline::{gaussian_abs_moment_root, run_gp_baseline, BaselineResult, BaselineRow, BaselineSummary, CONSTANCY_SPREAD};
pub use config::{EvalScheme, ExperimentConfig};
pub use deterministic::{
    adjacent_inversions, run_deterministic_experiment, DeterministicChecks, DeterministicResult, DeterministicRow,
    DeterministicSummary, PANEL2_SLOPE_FLOOR, PANEL2_SLOPE_RANGE,
};
pub use functions::{
    cauchy_density, derive_seed, estimate_reference_norm_constant, estimate_reference_norm_constant_on,
    test_function_gramacy,
};
pub use output::{check_output_dir, OutputBundle};
pub use stochastic::{
    run_stochastic_experiment, AlphaTrend, StochasticCell, StochasticChecks, StochasticResult, StochasticSummary,
};
