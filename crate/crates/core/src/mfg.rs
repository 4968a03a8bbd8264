//! Mean-field limit of the equilibrium, evaluated atom by atom.
//!
//! Every expectation is an exact weighted sum over the atoms of a
//! [`TypeDistribution`]. The representative-agent functions
//! ([`pi_star_mf`], [`rho_mf`], [`beta_mf`], [`lambda_mf`]) accept any
//! [`AgentType`], not only atoms of the distribution, so a single agent can be
//! evaluated against a fixed population.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{AgentType, TypeDistribution};

/// Relative tolerance for the single-stock consistency check in [`solve_mf`].
pub const SINGLE_STOCK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MfAggregates {
    pub phi: f64,
    pub psi: f64,
    pub ratio: f64,
    /// `E[theta (delta - 1)]`
    pub avg_theta_dm1: f64,
    /// `E[delta rho]`
    pub avg_delta_rho: f64,
    /// `E[delta log eps]`
    pub log_eps_delta: f64,
    /// `E[delta]`
    pub avg_delta: f64,
    /// `E[mu pi*]`
    pub avg_mu_pi: f64,
    /// `E[(sigma^2 + nu^2) pi*^2]`
    pub avg_var_pi_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfEquilibrium {
    pub horizon: f64,
    pub pi: Vec<f64>,
    pub rho: Vec<f64>,
    pub beta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub aggregates: MfAggregates,
    pub theta_crit: Option<f64>,
    pub delta_eff: Option<Vec<f64>>,
}

pub fn aggregates_mf(d: &TypeDistribution) -> Result<MfAggregates> {
    d.validate()?;
    let phi = d.expect(|a| a.delta * a.mu * a.sigma / a.big_sigma());
    let psi = d.expect(|a| a.theta * (a.delta - 1.0) * a.sigma * a.sigma / a.big_sigma());
    if !(1.0 + psi > 0.0) {
        return Err(Error::DegenerateAggregate(1.0 + psi));
    }
    let mut agg = MfAggregates {
        phi,
        psi,
        ratio: phi / (1.0 + psi),
        avg_theta_dm1: d.expect(|a| a.theta * (a.delta - 1.0)),
        avg_delta_rho: 0.0,
        log_eps_delta: d.expect(|a| a.delta * a.eps.ln()),
        avg_delta: d.expect(|a| a.delta),
        avg_mu_pi: 0.0,
        avg_var_pi_sq: 0.0,
    };
    if !(1.0 + agg.avg_theta_dm1 > 0.0) {
        return Err(Error::DegenerateAggregate(1.0 + agg.avg_theta_dm1));
    }
    agg.avg_mu_pi = d.expect(|a| a.mu * pi_star_mf(a, &agg));
    agg.avg_var_pi_sq = d.expect(|a| a.big_sigma() * pi_star_mf(a, &agg).powi(2));
    agg.avg_delta_rho = d.expect(|a| a.delta * rho_mf(a, &agg));
    Ok(agg)
}

pub fn pi_star_mf(t: &AgentType, a: &MfAggregates) -> f64 {
    let s = t.big_sigma();
    t.delta * t.mu / s - t.theta * (t.delta - 1.0) * t.sigma / s * a.ratio
}

/// Representative-agent `rho`.
///
/// The population drift term is `-theta E[mu pi*]`, the limit of the
/// `n`-agent `-(theta/n) sum_{k != i} mu_k pi_k`. Needs `avg_mu_pi` and
/// `avg_var_pi_sq` populated, which [`aggregates_mf`] does.
pub fn rho_mf(t: &AgentType, a: &MfAggregates) -> f64 {
    let q = t.utility_exponent();
    if q == 0.0 {
        return 0.0;
    }
    let th = t.theta;
    let r = a.ratio;
    let excess = t.mu - t.sigma * r * th * q;
    let own = t.delta * excess * excess / (2.0 * t.big_sigma());
    let cross = 0.5 * r * r * th * th * q;
    let drift = -th * a.avg_mu_pi;
    let spread = 0.5 * th * a.avg_var_pi_sq;
    q * (own + cross + drift + spread)
}

pub fn beta_mf(t: &AgentType, a: &MfAggregates) -> f64 {
    t.theta * (t.delta - 1.0) * a.avg_delta_rho / (1.0 + a.avg_theta_dm1) - t.delta * rho_mf(t, a)
}

pub fn lambda_mf(t: &AgentType, a: &MfAggregates) -> f64 {
    let w = t.theta * (t.delta - 1.0) / (1.0 + a.avg_theta_dm1);
    (-t.delta * t.eps.ln() + w * a.log_eps_delta).exp()
}

/// `(1 + E[theta (delta - 1)]) / E[delta]` for a single-stock distribution.
pub fn theta_crit_mf(d: &TypeDistribution) -> Result<f64> {
    d.single_stock().ok_or(Error::NotSingleStock)?;
    let num = 1.0 + d.expect(|a| a.theta * (a.delta - 1.0));
    Ok(num / d.expect(|a| a.delta))
}

/// Effective risk tolerance; may be negative.
pub fn delta_eff(t: &AgentType, theta_crit: f64) -> f64 {
    let w = t.theta / theta_crit;
    (1.0 - w) * t.delta + w
}

/// Merton investment fraction for risk tolerance `delta_eff`.
pub fn effective_pi(mu: f64, sigma: f64, delta_eff: f64) -> f64 {
    delta_eff * mu / (sigma * sigma)
}

/// Merton consumption exponent for risk tolerance `delta_eff`.
pub fn effective_beta(mu: f64, sigma: f64, delta_eff: f64) -> f64 {
    mu * mu / (2.0 * sigma * sigma) * delta_eff * (1.0 - delta_eff)
}

pub fn solve_mf(d: &TypeDistribution) -> Result<MfEquilibrium> {
    let agg = aggregates_mf(d)?;
    let agents: Vec<&AgentType> = d.atoms.iter().map(|a| &a.agent).collect();
    let pi: Vec<f64> = agents.iter().map(|t| pi_star_mf(t, &agg)).collect();
    let rho = agents.iter().map(|t| rho_mf(t, &agg)).collect();
    let beta: Vec<f64> = agents.iter().map(|t| beta_mf(t, &agg)).collect();
    let lambda = agents.iter().map(|t| lambda_mf(t, &agg)).collect();

    let (theta_crit, delta_eff_vec) = match d.single_stock() {
        Some(m) => {
            let tc = theta_crit_mf(d)?;
            let de: Vec<f64> = agents.iter().map(|t| delta_eff(t, tc)).collect();
            for (k, &x) in de.iter().enumerate() {
                let b = effective_beta(m.mu, m.sigma, x);
                let p = effective_pi(m.mu, m.sigma, x);
                if (beta[k] - b).abs() > SINGLE_STOCK_TOL * b.abs().max(1.0)
                    || (pi[k] - p).abs() > SINGLE_STOCK_TOL * p.abs().max(1.0)
                {
                    return Err(Error::SingleStockMismatch {
                        index: k,
                        detail: format!("beta {} vs {b}, pi {} vs {p}", beta[k], pi[k]),
                    });
                }
            }
            (Some(tc), Some(de))
        }
        None => (None, None),
    };

    Ok(MfEquilibrium {
        horizon: d.horizon,
        pi,
        rho,
        beta,
        lambda,
        aggregates: agg,
        theta_crit,
        delta_eff: delta_eff_vec,
    })
}
