#![allow(dead_code)]

use merton_arena::{AgentType, Atom, Population, TypeDistribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Agent with moderate Sharpe ratios, so equilibrium quantities stay O(1..100).
pub fn random_agent(r: &mut impl Rng) -> AgentType {
    AgentType {
        x0: r.random_range(0.5..2.0),
        delta: r.random_range(0.2..5.0),
        theta: r.random_range(0.0..=1.0),
        eps: r.random_range(0.2..3.0),
        mu: r.random_range(0.02..0.15),
        nu: r.random_range(0.0..0.3),
        sigma: r.random_range(0.1..0.4),
    }
}

pub fn random_population(r: &mut impl Rng, max_n: usize) -> Population {
    let n = r.random_range(2..=max_n);
    let horizon = r.random_range(0.5..2.0);
    Population::new(horizon, (0..n).map(|_| random_agent(r)).collect()).unwrap()
}

/// Distribution whose atoms all trade the same stock without idiosyncratic noise.
pub fn random_single_stock(r: &mut impl Rng) -> TypeDistribution {
    let mu = r.random_range(0.5..5.0);
    let sigma = r.random_range(0.5..2.0) * mu / 2.0;
    let k = r.random_range(1..=4);
    let raw: Vec<f64> = (0..k).map(|_| r.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut atoms: Vec<Atom> = raw
        .iter()
        .map(|w| Atom {
            weight: w / total,
            agent: AgentType { mu, sigma, nu: 0.0, ..random_agent(r) },
        })
        .collect();
    let rest: f64 = atoms[1..].iter().map(|a| a.weight).sum();
    atoms[0].weight = 1.0 - rest;
    TypeDistribution::new(1.0, atoms).unwrap()
}
