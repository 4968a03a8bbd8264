//! Closed-form strong equilibrium of the `n`-agent game.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::ConsumptionPolicy;
use crate::types::{validate_population, Population};

/// Relative tolerance for the volatility identity asserted by [`solve_n`].
pub const IDENTITY_TOL: f64 = 1e-10;

/// Population aggregates of the drift/volatility trade-off and competition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub phi: f64,
    pub psi: f64,
    /// `phi / (1 + psi)`, the population average of `sigma_k * pi_k`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaVector {
    pub gamma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumProfile {
    pub horizon: f64,
    pub pi: Vec<f64>,
    pub rho: Vec<f64>,
    pub beta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub aggregates: Aggregates,
    pub theta_crit: Option<f64>,
}

impl EquilibriumProfile {
    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    pub fn policy(&self, i: usize) -> ConsumptionPolicy {
        ConsumptionPolicy::new(self.beta[i], self.lambda[i], self.horizon)
            .expect("equilibrium lambda is positive")
    }

    pub fn policies(&self) -> Vec<ConsumptionPolicy> {
        (0..self.len()).map(|i| self.policy(i)).collect()
    }
}

/// `sigma_k^2 + nu_k^2 (1 + (delta_k - 1) theta_k / n)`, always positive for valid agents.
fn effective_variances(p: &Population) -> Vec<f64> {
    let n = p.len() as f64;
    p.agents
        .iter()
        .map(|a| a.sigma * a.sigma + a.nu * a.nu * (1.0 + (a.delta - 1.0) * a.theta / n))
        .collect()
}

pub fn aggregates_n(p: &Population) -> Result<Aggregates> {
    let n = p.len() as f64;
    let dens = effective_variances(p);
    let (mut phi, mut psi) = (0.0, 0.0);
    for (a, d) in p.agents.iter().zip(&dens) {
        phi += a.delta * a.mu * a.sigma / d;
        psi += a.theta * (a.delta - 1.0) * a.sigma * a.sigma / d;
    }
    phi /= n;
    psi /= n;
    if !(1.0 + psi > 0.0) {
        return Err(Error::DegenerateAggregate(1.0 + psi));
    }
    Ok(Aggregates {
        phi,
        psi,
        ratio: phi / (1.0 + psi),
    })
}

/// Equilibrium fractions of wealth in each agent's stock. Unclamped: shorting
/// and leverage are allowed.
pub fn invest_n(p: &Population, agg: &Aggregates) -> Vec<f64> {
    p.agents
        .iter()
        .zip(effective_variances(p))
        .map(|(a, d)| (a.delta * a.mu - a.theta * (a.delta - 1.0) * a.sigma * agg.ratio) / d)
        .collect()
}

pub fn gamma_n(p: &Population) -> Result<GammaVector> {
    let n = p.len() as f64;
    let gamma = p
        .agents
        .iter()
        .map(|a| {
            let denom = 1.0 - (1.0 - a.theta / n) * a.utility_exponent();
            if denom <= 0.0 {
                Err(Error::DivisionByZero("gamma"))
            } else {
                Ok(1.0 / denom)
            }
        })
        .collect::<Result<_>>()?;
    Ok(GammaVector { gamma })
}

/// Per-agent constant `rho_i` entering the consumption exponent.
///
/// Sums over `k != i` are formed as totals minus the own term. The
/// idiosyncratic cross term carries `1/n^2`, so it vanishes in the
/// mean-field limit.
pub fn rho_n(p: &Population, pi: &[f64]) -> Result<Vec<f64>> {
    let n = p.len() as f64;
    let total = |f: &dyn Fn(usize) -> f64| (0..p.len()).map(f).sum::<f64>();
    let ag = &p.agents;
    let sum_sigma_pi = total(&|k| ag[k].sigma * pi[k]);
    let sum_nu_pi_sq = total(&|k| (ag[k].nu * pi[k]).powi(2));
    let sum_mu_pi = total(&|k| ag[k].mu * pi[k]);
    let sum_var_pi_sq = total(&|k| ag[k].big_sigma() * pi[k] * pi[k]);

    ag.iter()
        .enumerate()
        .map(|(i, a)| {
            let q = a.utility_exponent();
            if q == 0.0 {
                return Ok(0.0);
            }
            let th = a.theta;
            let keep = 1.0 - th / n;
            let g = 1.0 - keep * q;
            if g <= 0.0 {
                return Err(Error::DivisionByZero("rho"));
            }
            let s_others = (sum_sigma_pi - a.sigma * pi[i]) / n;
            let nu_others = (sum_nu_pi_sq - (a.nu * pi[i]).powi(2)) / (n * n);
            let mu_others = (sum_mu_pi - a.mu * pi[i]) / n;
            let var_others = (sum_var_pi_sq - a.big_sigma() * pi[i] * pi[i]) / n;

            let excess = a.mu - a.sigma * th * q * s_others;
            let own = keep * excess * excess / (2.0 * a.big_sigma() * g);
            let cross = 0.5 * (s_others * s_others + nu_others) * th * th * q;
            let drift = -th * mu_others;
            let spread = 0.5 * th * var_others;
            Ok(q * (own + cross + drift + spread))
        })
        .collect()
}

/// Consumption constants `(beta_i, lambda_i)`. The geometric mean of
/// `eps_k^delta_k` is taken in log space.
pub fn beta_lambda_n(p: &Population, rho: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = p.len() as f64;
    let ag = &p.agents;
    let mean_theta_dm1 = ag.iter().map(|a| a.theta * (a.delta - 1.0)).sum::<f64>() / n;
    let denom = 1.0 + mean_theta_dm1;
    if denom <= 0.0 {
        return Err(Error::DegenerateAggregate(denom));
    }
    let mean_delta_rho = ag.iter().zip(rho).map(|(a, r)| a.delta * r).sum::<f64>() / n;
    let mean_log_eps_delta = ag.iter().map(|a| a.delta * a.eps.ln()).sum::<f64>() / n;

    let beta = ag
        .iter()
        .zip(rho)
        .map(|(a, r)| a.theta * (a.delta - 1.0) * mean_delta_rho / denom - a.delta * r)
        .collect();
    let lambda = ag
        .iter()
        .map(|a| {
            let w = a.theta * (a.delta - 1.0) / denom;
            (-a.delta * a.eps.ln() + w * mean_log_eps_delta).exp()
        })
        .collect();
    Ok((beta, lambda))
}

/// Critical competition level of a single-stock population.
pub fn theta_crit_n(p: &Population) -> Result<f64> {
    p.single_stock().ok_or(Error::NotSingleStock)?;
    let n = p.len() as f64;
    let num = 1.0 + p.agents.iter().map(|a| a.theta * (a.delta - 1.0)).sum::<f64>() / n;
    let mean_delta = p.agents.iter().map(|a| a.delta).sum::<f64>() / n;
    Ok(num / mean_delta)
}

/// `|(1/n) sum sigma_k pi_k - phi / (1 + psi)|`.
pub fn identity_residual(p: &Population, pi: &[f64], agg: &Aggregates) -> f64 {
    let n = p.len() as f64;
    let avg = p.agents.iter().zip(pi).map(|(a, x)| a.sigma * x).sum::<f64>() / n;
    (avg - agg.ratio).abs()
}

pub fn solve_n(p: &Population) -> Result<EquilibriumProfile> {
    validate_population(p)?;
    let aggregates = aggregates_n(p)?;
    let pi = invest_n(p, &aggregates);
    let residual = identity_residual(p, &pi, &aggregates);
    if residual > IDENTITY_TOL * aggregates.ratio.abs().max(1.0) {
        return Err(Error::IdentityViolation { residual });
    }
    let rho = rho_n(p, &pi)?;
    let (beta, lambda) = beta_lambda_n(p, &rho)?;
    let theta_crit = match p.single_stock() {
        Some(_) => Some(theta_crit_n(p)?),
        None => None,
    };
    Ok(EquilibriumProfile {
        horizon: p.horizon,
        pi,
        rho,
        beta,
        lambda,
        aggregates,
        theta_crit,
    })
}
