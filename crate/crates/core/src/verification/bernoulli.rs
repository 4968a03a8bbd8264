//! Three routes to the value-function factor `f_i`:
//! RK4 on the linearised Bernoulli equation, Gauss-Legendre quadrature of its
//! integral solution, and the closed exponential form valid at the fixed point.

use crate::error::{Error, Result};
use crate::nplayer::EquilibriumProfile;
use crate::policy::ConsumptionPolicy;
use crate::types::Population;

type Coefficient<'a> = Box<dyn Fn(f64) -> f64 + Sync + 'a>;

/// Consumption curves of all agents: rate `c_k(t)` and `int_t^T c_k`.
pub trait ConsumptionFamily: Sync {
    fn len(&self) -> usize;
    fn rate(&self, k: usize, t: f64) -> f64;
    fn cumulative(&self, k: usize, t: f64) -> f64;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ConsumptionFamily for Vec<ConsumptionPolicy> {
    fn len(&self) -> usize {
        Vec::len(self)
    }
    fn rate(&self, k: usize, t: f64) -> f64 {
        self[k].rate_unchecked((self[k].horizon - t).max(0.0))
    }
    fn cumulative(&self, k: usize, t: f64) -> f64 {
        self[k].cumulative_unchecked((self[k].horizon - t).max(0.0))
    }
}

/// Every curve of `inner` multiplied by a constant.
pub struct ScaledConsumption<'a> {
    pub inner: &'a dyn ConsumptionFamily,
    pub factor: f64,
}

impl ConsumptionFamily for ScaledConsumption<'_> {
    fn len(&self) -> usize {
        self.inner.len()
    }
    fn rate(&self, k: usize, t: f64) -> f64 {
        self.factor * self.inner.rate(k, t)
    }
    fn cumulative(&self, k: usize, t: f64) -> f64 {
        self.factor * self.inner.cumulative(k, t)
    }
}

/// Data of `f' + a f + b f^{1-gamma} = 0`, `f(T) = 1`.
pub struct BernoulliInputs<'a> {
    pub gamma: f64,
    a: Coefficient<'a>,
    b: Coefficient<'a>,
}

/// Arithmetic and geometric means (both with `1/n`) of the other agents' consumption.
pub(crate) fn others_means(c: &dyn ConsumptionFamily, i: usize, t: f64) -> (f64, f64) {
    let n = c.len() as f64;
    let (mut hat, mut log_bar) = (0.0, 0.0);
    for k in (0..c.len()).filter(|&k| k != i) {
        let ck = c.rate(k, t);
        hat += ck;
        log_bar += ck.ln();
    }
    (hat / n, (log_bar / n).exp())
}

impl<'a> BernoulliInputs<'a> {
    pub fn from_coefficients(
        gamma: f64,
        a: impl Fn(f64) -> f64 + Sync + 'a,
        b: impl Fn(f64) -> f64 + Sync + 'a,
    ) -> Self {
        BernoulliInputs {
            gamma,
            a: Box::new(a),
            b: Box::new(b),
        }
    }

    /// Coefficients faced by agent `i` when the others consume `c`:
    /// `a(t) = rho_i + theta_i (1 - 1/delta_i) hat_c_{-i}(t)` and
    /// `b(t) = eps_i^{-gamma_i} / gamma_i * bar_c_{-i}(t)^{-gamma_i theta_i (1 - 1/delta_i)}`.
    pub fn for_agent(
        p: &'a Population,
        rho: f64,
        i: usize,
        c: &'a dyn ConsumptionFamily,
    ) -> Result<Self> {
        let n = p.len();
        if i >= n || c.len() != n {
            return Err(Error::AgentIndex { index: i, n });
        }
        let ag = &p.agents[i];
        let q = ag.utility_exponent();
        let g = 1.0 - (1.0 - ag.theta / n as f64) * q;
        if g <= 0.0 {
            return Err(Error::DivisionByZero("gamma"));
        }
        let gamma = 1.0 / g;
        let (theta, eps) = (ag.theta, ag.eps);
        let scale = eps.powf(-gamma) / gamma;
        let tq = theta * q;
        Ok(BernoulliInputs {
            gamma,
            a: Box::new(move |t| rho + tq * others_means(c, i, t).0),
            b: Box::new(move |t| scale * others_means(c, i, t).1.powf(-gamma * tq)),
        })
    }

    pub fn a(&self, t: f64) -> f64 {
        (self.a)(t)
    }

    pub fn b(&self, t: f64) -> f64 {
        (self.b)(t)
    }
}

fn check_grid(horizon: f64, steps: usize) -> Result<()> {
    if steps < 2 {
        return Err(Error::InvalidGrid(format!("need at least 2 steps, got {steps}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::NonPositiveHorizon(horizon));
    }
    Ok(())
}

fn node(horizon: f64, steps: usize, j: usize) -> f64 {
    if j == steps {
        horizon
    } else {
        horizon * j as f64 / steps as f64
    }
}

fn to_f(gamma: f64, u: Vec<f64>, horizon: f64, steps: usize) -> Result<Vec<f64>> {
    u.into_iter()
        .enumerate()
        .map(|(j, x)| {
            if x > 0.0 && x.is_finite() {
                Ok(x.powf(1.0 / gamma))
            } else {
                Err(Error::NonPositiveSolution {
                    t: node(horizon, steps, j),
                    value: x,
                })
            }
        })
        .collect()
}

/// Relative agreement required between RK4 with `k` and `2k` substeps.
const SUBSTEP_TOL: f64 = 1e-13;
const MAX_SUBSTEPS: usize = 1 << 12;

/// `f` on `steps + 1` uniform nodes of `[0, T]`, by classical RK4 backward
/// from `T` on `u = f^gamma`, which satisfies `u' = -gamma (a u + b)`.
/// Each grid interval is split by step doubling until two successive
/// refinements agree, which resolves steep terminal layers in the data.
pub fn bernoulli_oracle(inputs: &BernoulliInputs, horizon: f64, steps: usize) -> Result<Vec<f64>> {
    check_grid(horizon, steps)?;
    let g = inputs.gamma;
    let rhs = |t: f64, u: f64| -g * (inputs.a(t) * u + inputs.b(t));
    let march = |t0: f64, t1: f64, y0: f64, k: usize| {
        let h = (t1 - t0) / k as f64;
        let mut y = y0;
        for s in 0..k {
            let t = t0 + h * s as f64;
            let k1 = rhs(t, y);
            let k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1);
            let k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2);
            let k4 = rhs(t + h, y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        y
    };
    let mut u = vec![0.0; steps + 1];
    u[steps] = 1.0;
    for j in (1..=steps).rev() {
        let (t0, t1) = (node(horizon, steps, j), node(horizon, steps, j - 1));
        let mut k = 1;
        let mut coarse = march(t0, t1, u[j], k);
        loop {
            let fine = march(t0, t1, u[j], 2 * k);
            k *= 2;
            if (fine - coarse).abs() <= SUBSTEP_TOL * fine.abs().max(1.0) || k >= MAX_SUBSTEPS {
                u[j - 1] = fine;
                break;
            }
            coarse = fine;
        }
    }
    to_f(g, u, horizon, steps)
}

const GL3_NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GL3_WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

fn gauss3(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    GL3_NODES
        .iter()
        .zip(GL3_WEIGHTS)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// `f = u^{1/gamma}` with
/// `u(t) = exp(gamma int_t^T a) + int_t^T gamma b(s) exp(gamma int_t^s a) ds`,
/// integrated interval by interval with 3-point Gauss-Legendre.
pub fn bernoulli_quadrature(inputs: &BernoulliInputs, horizon: f64, steps: usize) -> Result<Vec<f64>> {
    check_grid(horizon, steps)?;
    let g = inputs.gamma;
    // e(t_j) = exp(gamma int_{t_j}^T a); k(t_j) = int_{t_j}^T gamma b(s) exp(gamma int_{t_j}^s a) ds
    let mut u = vec![0.0; steps + 1];
    let mut tail_a = 0.0;
    let mut k_next = 0.0;
    u[steps] = 1.0;
    for j in (0..steps).rev() {
        let (lo, hi) = (node(horizon, steps, j), node(horizon, steps, j + 1));
        let seg_a = gauss3(lo, hi, |t| inputs.a(t));
        let local = gauss3(lo, hi, |s| {
            let partial = if s > lo { gauss3(lo, s, |r| inputs.a(r)) } else { 0.0 };
            g * inputs.b(s) * (g * partial).exp()
        });
        k_next = local + (g * seg_a).exp() * k_next;
        tail_a += seg_a;
        u[j] = (g * tail_a).exp() + k_next;
    }
    to_f(g, u, horizon, steps)
}

/// Closed form at the fixed point:
/// `f_i(t) = exp(rho_i (T-t) + theta_i (1-1/delta_i) (1/n) sum_k C_k(t) + C_i(t) / delta_i)`
/// with `C_k(t) = int_t^T c_k`.
pub fn exponential_form(
    p: &Population,
    rho: f64,
    i: usize,
    c: &dyn ConsumptionFamily,
    steps: usize,
) -> Vec<f64> {
    let ag = &p.agents[i];
    let n = p.len();
    let tq = ag.theta * ag.utility_exponent();
    (0..=steps)
        .map(|j| {
            let t = node(p.horizon, steps, j);
            let mean_cum = (0..n).map(|k| c.cumulative(k, t)).sum::<f64>() / n as f64;
            (rho * (p.horizon - t) + tq * mean_cum + c.cumulative(i, t) / ag.delta).exp()
        })
        .collect()
}

/// Convenience: the three routes for every agent of an equilibrium.
pub fn oracle_triplet(
    p: &Population,
    e: &EquilibriumProfile,
    i: usize,
    c: &dyn ConsumptionFamily,
    steps: usize,
) -> Result<[Vec<f64>; 3]> {
    let inputs = BernoulliInputs::for_agent(p, e.rho[i], i, c)?;
    Ok([
        bernoulli_oracle(&inputs, p.horizon, steps)?,
        bernoulli_quadrature(&inputs, p.horizon, steps)?,
        exponential_form(p, e.rho[i], i, c, steps),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sup_gap(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn log_investor_linear_solution() {
        let eps = 0.7;
        let inputs = BernoulliInputs::from_coefficients(1.0, |_| 0.0, move |_| 1.0 / eps);
        let f = bernoulli_oracle(&inputs, 2.0, 1000).unwrap();
        let q = bernoulli_quadrature(&inputs, 2.0, 1000).unwrap();
        for (j, (x, y)) in f.iter().zip(&q).enumerate() {
            let t = 2.0 * j as f64 / 1000.0;
            let exact = (2.0 - t) / eps + 1.0;
            assert!((x - exact).abs() <= 1e-10);
            assert!((y - exact).abs() <= 1e-10);
        }
    }

    #[test]
    fn homogeneous_linear_solution() {
        let alpha = -0.8;
        let inputs = BernoulliInputs::from_coefficients(2.5, move |_| alpha, |_| 0.0);
        let f = bernoulli_oracle(&inputs, 1.5, 2000).unwrap();
        for (j, x) in f.iter().enumerate() {
            let t = 1.5 * j as f64 / 2000.0;
            assert!((x - (alpha * (1.5 - t)).exp()).abs() <= 1e-10);
        }
    }

    #[test]
    fn time_varying_coefficients_agree() {
        let inputs = BernoulliInputs::from_coefficients(
            0.6,
            |t| 0.3 * (2.0 * t).sin() - 0.1,
            |t| 0.5 + 0.2 * t * t,
        );
        let f = bernoulli_oracle(&inputs, 1.0, 4000).unwrap();
        let q = bernoulli_quadrature(&inputs, 1.0, 4000).unwrap();
        assert!(sup_gap(&f, &q) <= 1e-10);
    }

    #[test]
    fn negative_solution_detected() {
        // u' = -gamma (a u + b) with b < 0 drives u through zero backward in time
        let inputs = BernoulliInputs::from_coefficients(1.0, |_| 0.0, |_| -2.0);
        assert!(matches!(
            bernoulli_oracle(&inputs, 1.0, 100),
            Err(Error::NonPositiveSolution { .. })
        ));
    }
}
