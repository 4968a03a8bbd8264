//! Agent parameters, finite populations and atomic type distributions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a [`TypeDistribution`].
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// One agent's type: initial wealth, preferences and the market of the stock it trades.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentType {
    pub x0: f64,
    /// Risk tolerance; `1` is the log investor.
    pub delta: f64,
    /// Competition weight in `[0, 1]`.
    pub theta: f64,
    /// Weight of terminal-wealth utility relative to consumption utility.
    pub eps: f64,
    pub mu: f64,
    /// Idiosyncratic volatility.
    pub nu: f64,
    /// Common-noise volatility.
    pub sigma: f64,
}

impl AgentType {
    /// Total variance rate `sigma^2 + nu^2`.
    pub fn big_sigma(&self) -> f64 {
        self.sigma * self.sigma + self.nu * self.nu
    }

    /// `1 - 1/delta`, the exponent of the power utility.
    pub fn utility_exponent(&self) -> f64 {
        1.0 - 1.0 / self.delta
    }

    pub fn validate(&self, index: usize) -> Result<()> {
        let positive = [
            ("x0", self.x0),
            ("delta", self.delta),
            ("eps", self.eps),
            ("mu", self.mu),
        ];
        for (field, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonPositiveParameter { field, index, value });
            }
        }
        for (field, value) in [("nu", self.nu), ("sigma", self.sigma)] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::NonPositiveParameter { field, index, value });
            }
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::ThetaOutOfRange {
                index,
                value: self.theta,
            });
        }
        if self.sigma + self.nu <= 0.0 {
            return Err(Error::DegenerateVolatility { index });
        }
        Ok(())
    }
}

/// A finite set of `n >= 2` agents sharing a horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub horizon: f64,
    pub agents: Vec<AgentType>,
}

impl Population {
    pub fn new(horizon: f64, agents: Vec<AgentType>) -> Result<Self> {
        let p = Population { horizon, agents };
        validate_population(&p)?;
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn single_stock(&self) -> Option<SingleStockMarket> {
        detect_single_stock(self.agents.iter())
    }

    /// Uniform empirical distribution, one atom per agent.
    pub fn empirical_distribution(&self) -> TypeDistribution {
        let w = 1.0 / self.len() as f64;
        TypeDistribution {
            horizon: self.horizon,
            atoms: self
                .agents
                .iter()
                .map(|&agent| Atom { weight: w, agent })
                .collect(),
        }
    }
}

/// Returns the first violated constraint, naming the agent index.
pub fn validate_population(p: &Population) -> Result<()> {
    if !(p.horizon > 0.0 && p.horizon.is_finite()) {
        return Err(Error::NonPositiveHorizon(p.horizon));
    }
    for (i, a) in p.agents.iter().enumerate() {
        a.validate(i)?;
    }
    if p.agents.len() < 2 {
        return Err(Error::TooFewAgents { n: p.agents.len() });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub weight: f64,
    #[serde(flatten)]
    pub agent: AgentType,
}

/// Weighted atoms describing a continuum of agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeDistribution {
    pub horizon: f64,
    pub atoms: Vec<Atom>,
}

impl TypeDistribution {
    pub fn new(horizon: f64, atoms: Vec<Atom>) -> Result<Self> {
        let d = TypeDistribution { horizon, atoms };
        d.validate()?;
        Ok(d)
    }

    /// A single atom of unit mass.
    pub fn point(horizon: f64, agent: AgentType) -> Result<Self> {
        Self::new(horizon, vec![Atom { weight: 1.0, agent }])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::NonPositiveHorizon(self.horizon));
        }
        if self.atoms.is_empty() {
            return Err(Error::InvalidWeights("no atoms".into()));
        }
        let mut total = 0.0;
        for (i, atom) in self.atoms.iter().enumerate() {
            if !(atom.weight > 0.0 && atom.weight.is_finite()) {
                return Err(Error::InvalidWeights(format!(
                    "atom {i} has weight {}",
                    atom.weight
                )));
            }
            atom.agent.validate(i)?;
            total += atom.weight;
        }
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidWeights(format!("weights sum to {total}")));
        }
        Ok(())
    }

    /// Exact expectation of `f` over the atoms.
    pub fn expect(&self, f: impl Fn(&AgentType) -> f64) -> f64 {
        self.atoms.iter().map(|a| a.weight * f(&a.agent)).sum()
    }

    pub fn single_stock(&self) -> Option<SingleStockMarket> {
        detect_single_stock(self.atoms.iter().map(|a| &a.agent))
    }

    /// Per-atom agent counts for an `n`-agent population, when `n * weight`
    /// is a positive integer for every atom.
    pub fn replication_counts(&self, n: usize) -> Result<Vec<usize>> {
        let counts: Vec<usize> = self
            .atoms
            .iter()
            .map(|a| {
                let exact = a.weight * n as f64;
                let rounded = exact.round();
                if rounded >= 1.0 && (exact - rounded).abs() <= 1e-9 * n.max(1) as f64 {
                    Ok(rounded as usize)
                } else {
                    Err(Error::NonReplicableWeights { n })
                }
            })
            .collect::<Result<_>>()?;
        if counts.iter().sum::<usize>() != n {
            return Err(Error::NonReplicableWeights { n });
        }
        Ok(counts)
    }

    /// The `n`-agent population whose empirical measure equals this
    /// distribution, atoms laid out contiguously in order.
    pub fn replicate(&self, n: usize) -> Result<(Population, Vec<usize>)> {
        let counts = self.replication_counts(n)?;
        let mut agents = Vec::with_capacity(n);
        let mut owner = Vec::with_capacity(n);
        for (k, (atom, &count)) in self.atoms.iter().zip(&counts).enumerate() {
            for _ in 0..count {
                agents.push(atom.agent);
                owner.push(k);
            }
        }
        Ok((Population::new(self.horizon, agents)?, owner))
    }
}

/// Shared `(mu, sigma)` of a market where every agent trades the same stock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleStockMarket {
    pub mu: f64,
    pub sigma: f64,
}

/// Exact match on `(mu, sigma)` with `nu == 0` for all agents.
pub fn detect_single_stock<'a>(
    agents: impl IntoIterator<Item = &'a AgentType>,
) -> Option<SingleStockMarket> {
    let mut iter = agents.into_iter();
    let first = iter.next()?;
    if first.nu != 0.0 || first.sigma <= 0.0 {
        return None;
    }
    for a in iter {
        if a.nu != 0.0 || a.mu.to_bits() != first.mu.to_bits() || a.sigma.to_bits() != first.sigma.to_bits() {
            return None;
        }
    }
    Some(SingleStockMarket {
        mu: first.mu,
        sigma: first.sigma,
    })
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn reference_population_is_valid() {
        assert!(validate_population(&reference_population()).is_ok());
    }

    #[test]
    fn zero_volatility_is_degenerate() {
        let mut a = reference_agent();
        a.sigma = 0.0;
        let p = Population {
            horizon: 1.0,
            agents: vec![reference_agent(), a],
        };
        assert_eq!(
            validate_population(&p),
            Err(Error::DegenerateVolatility { index: 1 })
        );
    }

    #[test]
    fn theta_above_one_rejected() {
        let mut a = reference_agent();
        a.theta = 1.2;
        let p = Population {
            horizon: 1.0,
            agents: vec![a, reference_agent()],
        };
        assert!(matches!(
            validate_population(&p),
            Err(Error::ThetaOutOfRange { index: 0, .. })
        ));
    }

    #[test]
    fn first_violation_reported() {
        let mut a = reference_agent();
        a.mu = -1.0;
        a.theta = 2.0;
        let p = Population {
            horizon: 1.0,
            agents: vec![reference_agent(), reference_agent(), a],
        };
        assert!(matches!(
            validate_population(&p),
            Err(Error::NonPositiveParameter {
                field: "mu",
                index: 2,
                ..
            })
        ));
    }

    #[test]
    fn too_few_agents_and_bad_horizon() {
        let p = Population {
            horizon: 1.0,
            agents: vec![reference_agent()],
        };
        assert_eq!(validate_population(&p), Err(Error::TooFewAgents { n: 1 }));
        let p = Population {
            horizon: 0.0,
            agents: vec![reference_agent(); 2],
        };
        assert!(matches!(
            validate_population(&p),
            Err(Error::NonPositiveHorizon(_))
        ));
    }

    #[test]
    fn nan_parameters_rejected() {
        let mut a = reference_agent();
        a.eps = f64::NAN;
        assert!(a.validate(0).is_err());
        a = reference_agent();
        a.theta = f64::NAN;
        assert!(a.validate(0).is_err());
    }

    #[test]
    fn single_stock_detection() {
        let p = reference_population();
        assert_eq!(
            p.single_stock(),
            Some(SingleStockMarket { mu: 5.0, sigma: 1.0 })
        );

        let mut q = p.clone();
        q.agents[1].nu = 0.1;
        assert_eq!(q.single_stock(), None);

        let mut q = p.clone();
        q.agents[1].mu = 4.0;
        assert_eq!(q.single_stock(), None);
    }

    #[test]
    fn distribution_weights_checked() {
        let a = reference_agent();
        assert!(TypeDistribution::new(
            1.0,
            vec![Atom { weight: 0.5, agent: a }, Atom { weight: 0.4, agent: a }]
        )
        .is_err());
        assert!(TypeDistribution::new(
            1.0,
            vec![Atom { weight: 0.5, agent: a }, Atom { weight: 0.5, agent: a }]
        )
        .is_ok());
    }

    #[test]
    fn replication() {
        let a = reference_agent();
        let mut b = a;
        b.delta = 2.0;
        let d = TypeDistribution::new(
            1.0,
            vec![Atom { weight: 0.25, agent: a }, Atom { weight: 0.75, agent: b }],
        )
        .unwrap();
        let (p, owner) = d.replicate(8).unwrap();
        assert_eq!(p.len(), 8);
        assert_eq!(owner, vec![0, 0, 1, 1, 1, 1, 1, 1]);
        assert_eq!(d.replicate(6), Err(Error::NonReplicableWeights { n: 6 }));
    }

    #[test]
    fn json_schema() {
        let json = r#"{"horizon": 1.0, "atoms": [{"weight": 1.0, "x0": 1, "delta": 3,
            "theta": 0.8, "eps": 1, "mu": 5, "nu": 0, "sigma": 1}]}"#;
        let d: TypeDistribution = serde_json::from_str(json).unwrap();
        assert_eq!(d.atoms[0].agent, reference_agent());
    }
}
