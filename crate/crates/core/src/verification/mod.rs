//! Independent checks of the closed-form equilibrium: ODE and quadrature
//! oracles for the value-function factor, fixed-point residuals, Monte Carlo
//! best-response scans, and the finite-`n` to mean-field convergence table.

mod bernoulli;
mod best_response;
mod convergence;
mod fixed_point;

use serde::{Deserialize, Serialize};

pub use bernoulli::{
    bernoulli_oracle, bernoulli_quadrature, exponential_form, oracle_triplet, BernoulliInputs,
    ConsumptionFamily, ScaledConsumption,
};
pub use best_response::{
    best_response_scan, best_response_test, BestResponseCell, BestResponseReport,
    PerturbationGrid, SIGNIFICANCE,
};
pub use convergence::{mfg_convergence, ConvergenceRow, ConvergenceTable};
pub use fixed_point::{
    fixed_point_check, fixed_point_check_with, FixedPointReport, OracleGaps, DEFAULT_ORACLE_STEPS,
};

/// Tolerance on fixed-point residuals and oracle gaps.
pub const FIXED_POINT_TOL: f64 = 1e-8;

/// Everything the `verify` command runs, as written to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub fixed_point: FixedPointReport,
    pub best_response: Vec<BestResponseReport>,
    pub convergence: Option<ConvergenceTable>,
    pub passed: bool,
}
