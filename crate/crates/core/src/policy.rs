//! Equilibrium consumption curve `c(t)` and consumption-regime analytics.
//!
//! `c(t) = [(1 - e^{-beta tau}) / beta + e^{-beta tau} / lambda]^{-1}` with
//! `tau = T - t`, evaluated through `expm1`/`log1p` so that `beta -> 0` is
//! continuous.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this `|beta * tau|` the `beta = 0` branch is used.
pub const BETA_BRANCH_EPS: f64 = 1e-12;

/// Relative tolerance for the constant-consumption regime.
pub const REGIME_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsumptionPolicy {
    pub beta: f64,
    pub lambda: f64,
    pub horizon: f64,
}

impl ConsumptionPolicy {
    pub fn new(beta: f64, lambda: f64, horizon: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::NonPositiveParameter {
                field: "lambda",
                index: 0,
                value: lambda,
            });
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::NonPositiveHorizon(horizon));
        }
        if !beta.is_finite() {
            return Err(Error::InvalidStrategy(format!("beta = {beta}")));
        }
        Ok(ConsumptionPolicy { beta, lambda, horizon })
    }

    fn time_to_go(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::OutOfDomain { t, horizon: self.horizon });
        }
        Ok(self.horizon - t)
    }

    /// Consumption rate per unit wealth at time `t`.
    pub fn rate(&self, t: f64) -> Result<f64> {
        Ok(self.rate_unchecked(self.time_to_go(t)?))
    }

    pub(crate) fn rate_unchecked(&self, tau: f64) -> f64 {
        let (b, l) = (self.beta, self.lambda);
        let x = b * tau;
        if x.abs() < BETA_BRANCH_EPS {
            1.0 / (tau + 1.0 / l)
        } else if x >= 0.0 {
            1.0 / (-(-x).exp_m1() / b + (-x).exp() / l)
        } else {
            // multiply through by e^x; expm1(x)/b > 0 here
            x.exp() / (x.exp_m1() / b + 1.0 / l)
        }
    }

    /// `int_t^T c(s) ds`.
    pub fn cumulative(&self, t: f64) -> Result<f64> {
        Ok(self.cumulative_unchecked(self.time_to_go(t)?))
    }

    pub(crate) fn cumulative_unchecked(&self, tau: f64) -> f64 {
        let (b, l) = (self.beta, self.lambda);
        let x = b * tau;
        if x.abs() < BETA_BRANCH_EPS {
            (l * tau).ln_1p()
        } else if x <= 1.0 {
            (l / b * x.exp_m1()).ln_1p()
        } else {
            x + ((-x).exp() - l / b * (-x).exp_m1()).ln()
        }
    }
}

pub fn consumption_rate(p: &ConsumptionPolicy, t: f64) -> Result<f64> {
    p.rate(t)
}

pub fn cumulative_consumption(p: &ConsumptionPolicy, t: f64) -> Result<f64> {
    p.cumulative(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Increasing,
    Decreasing,
    Constant,
}

impl Regime {
    /// `+1` increasing, `-1` decreasing, `0` constant.
    pub fn code(self) -> i8 {
        match self {
            Regime::Increasing => 1,
            Regime::Decreasing => -1,
            Regime::Constant => 0,
        }
    }
}

/// Direction of `c(t)` over the horizon: increasing iff `beta < lambda`.
pub fn classify_regime(beta: f64, lambda: f64) -> Regime {
    let tol = REGIME_TOL * lambda.abs().max(1.0);
    if beta < lambda - tol {
        Regime::Increasing
    } else if beta > lambda + tol {
        Regime::Decreasing
    } else {
        Regime::Constant
    }
}

/// Interval `(delta_-, delta_+)` of own risk tolerances for which a
/// single-stock agent with unit `lambda` decreases consumption.
///
/// Empty when `8 sigma^2 >= mu^2` (then `beta < 1` for every `delta`) or
/// when `theta == theta_crit` (then `beta = 0`). Assumes `lambda = 1`; the
/// caller is responsible for that.
pub fn delta_band(mu: f64, sigma: f64, theta: f64, theta_crit: f64) -> Option<(f64, f64)> {
    let disc = 1.0 - 8.0 * sigma * sigma / (mu * mu);
    if disc <= 0.0 {
        return None;
    }
    let w = theta / theta_crit - 1.0;
    if w.abs() <= REGIME_TOL {
        return None;
    }
    let centre = 1.0 + 0.5 / w;
    let half = 0.5 * disc.sqrt() / w.abs();
    Some((centre - half, centre + half))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub band: Option<(f64, f64)>,
    pub condition_8s2_gt_m2: bool,
}

/// Single-stock context for [`regime_report`]: `(mu, sigma, theta, theta_crit)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleStockContext {
    pub mu: f64,
    pub sigma: f64,
    pub theta: f64,
    pub theta_crit: f64,
}

pub fn regime_report(beta: f64, lambda: f64, single: Option<SingleStockContext>) -> RegimeReport {
    let regime = classify_regime(beta, lambda);
    let (band, cond) = match single {
        Some(s) => {
            let cond = 8.0 * s.sigma * s.sigma > s.mu * s.mu;
            let unit_lambda = (lambda - 1.0).abs() <= REGIME_TOL;
            let band = if unit_lambda {
                delta_band(s.mu, s.sigma, s.theta, s.theta_crit)
            } else {
                None
            };
            (band, cond)
        }
        None => (None, false),
    };
    RegimeReport {
        regime,
        band,
        condition_8s2_gt_m2: cond,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mfg::{delta_eff, effective_beta};
    use crate::types::fixtures::reference_agent;
    use crate::types::AgentType;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Printed form, accurate away from beta = 0.
    fn naive_rate(b: f64, l: f64, tau: f64) -> f64 {
        1.0 / (1.0 / b + (1.0 / l - 1.0 / b) * (-b * tau).exp())
    }

    #[test]
    fn rate_examples() {
        let p = ConsumptionPolicy::new(0.0, 1.0, 1.0).unwrap();
        assert_eq!(p.rate(0.0).unwrap(), 0.5);
        let p = ConsumptionPolicy::new(25.0 / 9.0, 1.0, 1.0).unwrap();
        // 1 / (9/25 + 16/25 e^{-25/9})
        assert_abs_diff_eq!(p.rate(0.0).unwrap(), 2.501294573933245, epsilon = 1e-12);
        for (b, l) in [(25.0 / 9.0, 1.0), (-3.0, 0.4), (0.0, 2.0), (1e-14, 3.0)] {
            let p = ConsumptionPolicy::new(b, l, 2.0).unwrap();
            assert_abs_diff_eq!(p.rate(2.0).unwrap(), l, epsilon = 1e-15);
        }
        assert!(matches!(p.rate(1.5), Err(Error::OutOfDomain { .. })));
        assert!(matches!(p.rate(-0.1), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn rate_matches_printed_form() {
        for (b, l) in [(2.0, 1.0), (-1.5, 0.3), (0.7, 4.0), (-20.0, 1.0)] {
            let p = ConsumptionPolicy::new(b, l, 1.5).unwrap();
            for t in [0.0, 0.3, 1.0, 1.49] {
                let naive = naive_rate(b, l, 1.5 - t);
                assert_abs_diff_eq!(p.rate(t).unwrap(), naive, epsilon = 1e-12 * naive);
            }
        }
    }

    #[test]
    fn extreme_betas_stay_positive() {
        for b in [-900.0, -50.0, 50.0, 900.0] {
            let p = ConsumptionPolicy::new(b, 1.0, 1.0).unwrap();
            let c = p.rate(0.0).unwrap();
            assert!(c.is_finite() && c >= 0.0, "beta {b}: {c}");
            assert!(p.cumulative(0.0).unwrap().is_finite());
        }
    }

    #[test]
    fn cumulative_examples() {
        let p = ConsumptionPolicy::new(0.0, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(p.cumulative(0.0).unwrap(), 2f64.ln(), epsilon = 1e-15);
        assert_eq!(p.cumulative(1.0).unwrap(), 0.0);
        let p = ConsumptionPolicy::new(25.0 / 9.0, 1.0, 1.0).unwrap();
        let c0 = p.cumulative(0.0).unwrap();
        // log(1 + (9/25)(e^{25/9} - 1))
        assert_abs_diff_eq!(c0, 1.860_969_350_357_791, epsilon = 1e-12);
        assert_abs_diff_eq!(
            p.rate(0.0).unwrap() * c0.exp(),
            (25.0f64 / 9.0).exp(),
            epsilon = 1e-12
        );
        assert_eq!(p.cumulative(1.0).unwrap(), 0.0);
    }

    #[test]
    fn regimes() {
        assert_eq!(classify_regime(25.0 / 9.0, 1.0), Regime::Decreasing);
        assert_eq!(classify_regime(0.0, 1.0), Regime::Increasing);
        assert_eq!(classify_regime(1.0, 1.0), Regime::Constant);
        assert_eq!(classify_regime(1.0 + 5e-13, 1.0), Regime::Constant);
        assert_eq!(classify_regime(1.0 + 2e-12, 1.0), Regime::Decreasing);
    }

    #[test]
    fn band_examples() {
        let (lo, hi) = delta_band(5.0, 1.0, 0.0, 0.52).unwrap();
        assert_abs_diff_eq!(lo, 0.5 * (1.0 - 0.68f64.sqrt()), epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 0.5 * (1.0 + 0.68f64.sqrt()), epsilon = 1e-15);
        assert_abs_diff_eq!(lo, 0.087689, epsilon = 1e-6);
        assert_abs_diff_eq!(hi, 0.912311, epsilon = 1e-6);
        // roots of 12.5 delta (1 - delta) = 1
        assert_abs_diff_eq!(12.5 * lo * (1.0 - lo), 1.0, epsilon = 1e-12);
        assert_eq!(delta_band(1.0, 1.0, 0.3, 0.52), None);
        assert_eq!(delta_band(5.0, 1.0, 0.52, 0.52), None);
        // above theta_crit the band lies above 1
        let (lo, hi) = delta_band(5.0, 1.0, 0.9, 0.52).unwrap();
        assert!(1.0 < lo && lo < hi);
    }

    #[test]
    fn report_band_only_with_unit_lambda() {
        let s = SingleStockContext { mu: 5.0, sigma: 1.0, theta: 0.0, theta_crit: 0.52 };
        let r = regime_report(2.0, 1.0, Some(s));
        assert_eq!(r.regime, Regime::Decreasing);
        assert!(r.band.is_some());
        assert!(!r.condition_8s2_gt_m2);
        assert!(regime_report(2.0, 1.5, Some(s)).band.is_none());
        assert!(regime_report(2.0, 1.0, None).band.is_none());
    }

    #[test]
    fn branch_continuity() {
        let tiny = ConsumptionPolicy::new(1e-13, 1.7, 2.0).unwrap();
        let zero = ConsumptionPolicy::new(0.0, 1.7, 2.0).unwrap();
        let above = ConsumptionPolicy::new(2e-12, 1.7, 2.0).unwrap();
        for k in 0..=200 {
            let t = 2.0 * k as f64 / 200.0;
            assert!((tiny.rate(t).unwrap() - zero.rate(t).unwrap()).abs() <= 1e-9);
            assert!((above.rate(t).unwrap() - zero.rate(t).unwrap()).abs() <= 1e-9);
            assert!((above.cumulative(t).unwrap() - zero.cumulative(t).unwrap()).abs() <= 1e-9);
        }
    }

    fn policy_strategy() -> impl Strategy<Value = ConsumptionPolicy> {
        (-8.0f64..8.0, 0.05f64..5.0, 0.1f64..3.0)
            .prop_map(|(b, l, h)| ConsumptionPolicy::new(b, l, h).unwrap())
    }

    proptest! {
        #[test]
        fn derivative_of_cumulative_is_rate(p in policy_strategy(), u in 0.0f64..1.0) {
            let h = 1e-5;
            let t = u * (p.horizon - h);
            let fd = (p.cumulative(t).unwrap() - p.cumulative(t + h).unwrap()) / h;
            prop_assert!((fd - p.rate(t + 0.5 * h).unwrap()).abs() <= 1e-6 * p.rate(t).unwrap().max(1.0));
        }

        #[test]
        fn exponential_identity(p in policy_strategy(), u in 0.0f64..=1.0) {
            let t = u * p.horizon;
            let lhs = p.rate(t).unwrap() * p.cumulative(t).unwrap().exp();
            let rhs = p.lambda * (p.beta * (p.horizon - t)).exp();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs);
        }

        #[test]
        fn monotone_in_regime_direction(p in policy_strategy(), pairs in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 20)) {
            let sign = (p.lambda - p.beta).signum();
            for (u, v) in pairs {
                let (t1, t2) = (u.min(v) * p.horizon, u.max(v) * p.horizon);
                if t2 - t1 < 1e-6 {
                    continue;
                }
                let diff = p.rate(t2).unwrap() - p.rate(t1).unwrap();
                prop_assert_eq!(diff.signum(), sign);
            }
        }

        #[test]
        fn band_matches_classification(theta in 0.0f64..=1.0, delta in 0.01f64..8.0) {
            let d = crate::types::TypeDistribution::point(1.0, AgentType { delta: 5.0, theta: 0.4, ..reference_agent() }).unwrap();
            let agg = crate::mfg::aggregates_mf(&d).unwrap();
            let tc = crate::mfg::theta_crit_mf(&d).unwrap();
            let rep = AgentType { delta, theta, ..reference_agent() };
            let beta = crate::mfg::beta_mf(&rep, &agg);
            prop_assert!((beta - effective_beta(5.0, 1.0, delta_eff(&rep, tc))).abs() <= 1e-9 * beta.abs().max(1.0));
            if let Some((lo, hi)) = delta_band(5.0, 1.0, theta, tc) {
                prop_assume!((delta - lo).abs() > 1e-6 && (delta - hi).abs() > 1e-6);
                let inside = lo < delta && delta < hi;
                prop_assert_eq!(classify_regime(beta, 1.0) == Regime::Decreasing, inside);
            }
        }
    }
}
