use serde::{Deserialize, Serialize};

use super::bernoulli::{
    bernoulli_oracle, bernoulli_quadrature, exponential_form, others_means, BernoulliInputs,
    ConsumptionFamily,
};
use crate::error::{Error, Result};
use crate::nplayer::{identity_residual, EquilibriumProfile};
use crate::types::Population;

pub const DEFAULT_ORACLE_STEPS: usize = 10_000;

/// Sup-norm gaps between the three computations of one agent's `f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleGaps {
    pub ode_vs_exponential: f64,
    pub ode_vs_quadrature: f64,
    pub quadrature_vs_exponential: f64,
}

impl OracleGaps {
    pub fn max(&self) -> f64 {
        self.ode_vs_exponential
            .max(self.ode_vs_quadrature)
            .max(self.quadrature_vs_exponential)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub steps: usize,
    /// `max |c_i - eps_i^{-gamma_i} bar_c_{-i}^{-gamma_i theta_i (1-1/delta_i)} f_i^{-gamma_i}|`
    /// with `f_i` from the ODE oracle.
    pub consumption_residual: f64,
    /// `max |f' + a f + b f^{1-gamma}|` for the exponential-form `f`.
    pub ode_residual: f64,
    pub identity_residual: f64,
    pub agents: Vec<OracleGaps>,
}

impl FixedPointReport {
    pub fn max_oracle_gap(&self) -> f64 {
        self.agents.iter().map(OracleGaps::max).fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.consumption_residual <= tol
            && self.ode_residual <= tol
            && self.max_oracle_gap() <= tol
    }
}

fn sup_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Fixed-point residuals of the closed-form equilibrium.
pub fn fixed_point_check(
    p: &Population,
    e: &EquilibriumProfile,
    steps: usize,
) -> Result<FixedPointReport> {
    let policies = e.policies();
    fixed_point_check_with(p, e, &policies, steps)
}

/// As [`fixed_point_check`] but with arbitrary consumption curves in place of
/// the equilibrium ones; `e` still supplies `pi` and `rho`.
pub fn fixed_point_check_with(
    p: &Population,
    e: &EquilibriumProfile,
    c: &dyn ConsumptionFamily,
    steps: usize,
) -> Result<FixedPointReport> {
    let n = p.len();
    if e.len() != n || c.len() != n {
        return Err(Error::InvalidStrategy(format!(
            "population of {n} but profile of {} and {} consumption curves",
            e.len(),
            c.len()
        )));
    }
    let horizon = p.horizon;
    let mut consumption_residual: f64 = 0.0;
    let mut ode_residual: f64 = 0.0;
    let mut agents = Vec::with_capacity(n);
    for i in 0..n {
        let ag = &p.agents[i];
        let tq = ag.theta * ag.utility_exponent();
        let inputs = BernoulliInputs::for_agent(p, e.rho[i], i, c)?;
        let gamma = inputs.gamma;
        let ode = bernoulli_oracle(&inputs, horizon, steps)?;
        let quad = bernoulli_quadrature(&inputs, horizon, steps)?;
        let expo = exponential_form(p, e.rho[i], i, c, steps);
        agents.push(OracleGaps {
            ode_vs_exponential: sup_gap(&ode, &expo),
            ode_vs_quadrature: sup_gap(&ode, &quad),
            quadrature_vs_exponential: sup_gap(&quad, &expo),
        });
        for j in 0..=steps {
            let t = if j == steps { horizon } else { horizon * j as f64 / steps as f64 };
            let ci = c.rate(i, t);
            let (hat, bar) = others_means(c, i, t);
            let best = ag.eps.powf(-gamma) * bar.powf(-gamma * tq) * ode[j].powf(-gamma);
            consumption_residual = consumption_residual.max((ci - best).abs());

            let f = expo[j];
            let slope = -(e.rho[i] + tq * (hat + ci / n as f64) + ci / ag.delta) * f;
            let defect = slope + inputs.a(t) * f + inputs.b(t) * f.powf(1.0 - gamma);
            ode_residual = ode_residual.max(defect.abs());
        }
    }
    Ok(FixedPointReport {
        steps,
        consumption_residual,
        ode_residual,
        identity_residual: identity_residual(p, &e.pi, &e.aggregates),
        agents,
    })
}
