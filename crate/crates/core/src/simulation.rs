//! Exact log-space Monte Carlo of the coupled wealth processes and estimation
//! of each agent's objective.
//!
//! On a segment where `pi` is constant the log-wealth increment is Gaussian
//! and sampled exactly:
//! `dlog X = (pi mu - pi^2 (sigma^2 + nu^2) / 2) dt - int c dt + pi nu dW + pi sigma dB`.
//! Only the time integrals (consumption and the running utility) use the
//! trapezoid rule on the grid. Consumption is linear between grid nodes, so its
//! trapezoid integral is exact for the represented strategy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nplayer::EquilibriumProfile;
use crate::rng::{fill_standard_normal, COMMON_CHANNEL};
use crate::types::Population;

pub const DEFAULT_STEPS: usize = 1000;
pub const DEFAULT_PATHS: usize = 100_000;

/// Paths per parallel block. Block results are merged in block order so the
/// output does not depend on scheduling.
pub(crate) const BLOCK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if steps < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 steps, got {steps}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::NonPositiveHorizon(horizon));
        }
        Ok(TimeGrid { horizon, steps })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        if j == self.steps {
            self.horizon
        } else {
            self.horizon * j as f64 / self.steps as f64
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|j| self.time(j)).collect()
    }
}

/// Per-agent investment (constant on each grid segment) and consumption rate
/// (values at grid nodes, linear in between).
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyProfile {
    grid: TimeGrid,
    pi: Vec<Vec<f64>>,
    consumption: Vec<Vec<f64>>,
}

impl StrategyProfile {
    pub fn new(grid: TimeGrid, pi: Vec<Vec<f64>>, consumption: Vec<Vec<f64>>) -> Result<Self> {
        if pi.len() != consumption.len() {
            return Err(Error::InvalidStrategy(format!(
                "{} investment rows vs {} consumption rows",
                pi.len(),
                consumption.len()
            )));
        }
        for (k, (p, c)) in pi.iter().zip(&consumption).enumerate() {
            if p.len() != grid.steps || c.len() != grid.steps + 1 {
                return Err(Error::InvalidStrategy(format!(
                    "agent {k}: expected {} segments and {} nodes",
                    grid.steps,
                    grid.steps + 1
                )));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidStrategy(format!("agent {k}: non-finite pi")));
            }
            if c.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(Error::NonPositiveConsumption { agent: k });
            }
        }
        Ok(StrategyProfile { grid, pi, consumption })
    }

    /// Constant investment `pis[k]` and consumption `c(k, t)` sampled on the grid.
    pub fn from_fns(grid: TimeGrid, pis: &[f64], c: impl Fn(usize, f64) -> f64) -> Result<Self> {
        let pi = pis.iter().map(|&x| vec![x; grid.steps]).collect();
        let consumption = (0..pis.len())
            .map(|k| (0..=grid.steps).map(|j| c(k, grid.time(j))).collect())
            .collect();
        Self::new(grid, pi, consumption)
    }

    pub fn equilibrium(profile: &EquilibriumProfile, grid: TimeGrid) -> Result<Self> {
        let policies = profile.policies();
        Self::from_fns(grid, &profile.pi, |k, t| {
            policies[k].rate_unchecked((profile.horizon - t).max(0.0))
        })
    }

    /// Replace agent `i`'s strategy.
    pub fn with_agent(&self, i: usize, pi: Vec<f64>, consumption: Vec<f64>) -> Result<Self> {
        if i >= self.n_agents() {
            return Err(Error::AgentIndex { index: i, n: self.n_agents() });
        }
        let mut pis = self.pi.clone();
        let mut cs = self.consumption.clone();
        pis[i] = pi;
        cs[i] = consumption;
        Self::new(self.grid, pis, cs)
    }

    pub fn n_agents(&self) -> usize {
        self.pi.len()
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn pi(&self, k: usize) -> &[f64] {
        &self.pi[k]
    }

    pub fn consumption(&self, k: usize) -> &[f64] {
        &self.consumption[k]
    }
}

/// Strategy-dependent constants of the log-wealth recursion.
pub(crate) struct Prepared {
    /// Deterministic increment per agent and segment.
    drift: Vec<Vec<f64>>,
    /// `pi nu` per agent and segment.
    idio_load: Vec<Vec<f64>>,
    /// `pi sigma` per agent and segment.
    common_load: Vec<Vec<f64>>,
    pub(crate) log_c: Vec<Vec<f64>>,
    log_x0: Vec<f64>,
}

impl Prepared {
    pub(crate) fn new(p: &Population, s: &StrategyProfile) -> Result<Self> {
        if p.len() != s.n_agents() {
            return Err(Error::InvalidStrategy(format!(
                "{} agents but strategies for {}",
                p.len(),
                s.n_agents()
            )));
        }
        let dt = s.grid.dt();
        let mut out = Prepared {
            drift: Vec::with_capacity(p.len()),
            idio_load: Vec::with_capacity(p.len()),
            common_load: Vec::with_capacity(p.len()),
            log_c: Vec::with_capacity(p.len()),
            log_x0: p.agents.iter().map(|a| a.x0.ln()).collect(),
        };
        for (k, a) in p.agents.iter().enumerate() {
            let pi = &s.pi[k];
            let c = &s.consumption[k];
            out.drift.push(
                (0..s.grid.steps)
                    .map(|j| {
                        (pi[j] * a.mu - 0.5 * pi[j] * pi[j] * a.big_sigma()) * dt
                            - 0.5 * dt * (c[j] + c[j + 1])
                    })
                    .collect(),
            );
            out.idio_load.push(pi.iter().map(|x| x * a.nu).collect());
            out.common_load.push(pi.iter().map(|x| x * a.sigma).collect());
            out.log_c.push(c.iter().map(|x| x.ln()).collect());
        }
        Ok(out)
    }
}

/// Brownian increments of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathNoise {
    /// Shared `dB`, length `steps`.
    pub common: Vec<f64>,
    /// `dW^k`, agent-major, length `n * steps`.
    pub idiosyncratic: Vec<f64>,
}

/// Generates noise and log-wealth paths for a population on a grid.
pub struct PathSimulator {
    grid: TimeGrid,
    n: usize,
    seed: u64,
}

impl PathSimulator {
    pub fn new(p: &Population, grid: TimeGrid, seed: u64) -> Self {
        PathSimulator { grid, n: p.len(), seed }
    }

    pub fn noise(&self, path: usize) -> PathNoise {
        let m = self.grid.steps;
        let sd = self.grid.dt().sqrt();
        let mut common = vec![0.0; m];
        fill_standard_normal(self.seed, COMMON_CHANNEL, path as u64, &mut common);
        let mut idiosyncratic = vec![0.0; self.n * m];
        for (k, chunk) in idiosyncratic.chunks_exact_mut(m).enumerate() {
            fill_standard_normal(self.seed, k as u64, path as u64, chunk);
        }
        common.iter_mut().chain(idiosyncratic.iter_mut()).for_each(|z| *z *= sd);
        PathNoise { common, idiosyncratic }
    }

    /// Agent-major log-wealth on the grid nodes, length `n * (steps + 1)`.
    pub(crate) fn log_wealth_into(&self, prep: &Prepared, noise: &PathNoise, out: &mut [f64]) {
        let m = self.grid.steps;
        for k in 0..self.n {
            let row = &mut out[k * (m + 1)..(k + 1) * (m + 1)];
            let dw = &noise.idiosyncratic[k * m..(k + 1) * m];
            let (drift, li, lc) = (&prep.drift[k], &prep.idio_load[k], &prep.common_load[k]);
            let mut x = prep.log_x0[k];
            row[0] = x;
            for j in 0..m {
                x += drift[j] + li[j] * dw[j] + lc[j] * noise.common[j];
                row[j + 1] = x;
            }
        }
    }
}

/// Materialised Monte Carlo output. Memory is `paths * n * (steps + 1)`
/// doubles; large runs should use [`paired_objectives`] instead.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationBatch {
    pub grid: TimeGrid,
    pub paths: usize,
    pub seed: u64,
    pub n_agents: usize,
    /// Shape `(paths, n_agents, steps + 1)`, row-major.
    pub log_wealth: Vec<f64>,
    /// Shape `(paths, steps)`.
    pub common_increments: Vec<f64>,
    /// Shape `(paths, n_agents, steps)`.
    pub idiosyncratic_increments: Vec<f64>,
}

impl SimulationBatch {
    pub fn log_wealth_path(&self, path: usize) -> &[f64] {
        let w = self.n_agents * (self.grid.steps + 1);
        &self.log_wealth[path * w..(path + 1) * w]
    }

    pub fn log_wealth_at(&self, path: usize, agent: usize, j: usize) -> f64 {
        self.log_wealth_path(path)[agent * (self.grid.steps + 1) + j]
    }
}

pub fn simulate(
    p: &Population,
    s: &StrategyProfile,
    paths: usize,
    seed: u64,
) -> Result<SimulationBatch> {
    let grid = s.grid;
    if paths == 0 {
        return Err(Error::InvalidGrid("need at least one path".into()));
    }
    let prep = Prepared::new(p, s)?;
    let sim = PathSimulator::new(p, grid, seed);
    let n = p.len();
    let m = grid.steps;
    let per_path: Vec<(Vec<f64>, PathNoise)> = (0..paths)
        .into_par_iter()
        .map(|path| {
            let noise = sim.noise(path);
            let mut lw = vec![0.0; n * (m + 1)];
            sim.log_wealth_into(&prep, &noise, &mut lw);
            (lw, noise)
        })
        .collect();
    let mut batch = SimulationBatch {
        grid,
        paths,
        seed,
        n_agents: n,
        log_wealth: Vec::with_capacity(paths * n * (m + 1)),
        common_increments: Vec::with_capacity(paths * m),
        idiosyncratic_increments: Vec::with_capacity(paths * n * m),
    };
    for (lw, noise) in per_path {
        batch.log_wealth.extend(lw);
        batch.common_increments.extend(noise.common);
        batch.idiosyncratic_increments.extend(noise.idiosyncratic);
    }
    Ok(batch)
}

/// Power utility `x^{1-1/delta} / (1 - 1/delta)`, or `log x` at `delta = 1`.
pub fn utility(x: f64, delta: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::DomainError(x));
    }
    Ok(utility_of_log(x.ln(), delta))
}

/// `U(e^l; delta)`, avoiding the round trip through `x`.
#[inline]
pub fn utility_of_log(l: f64, delta: f64) -> f64 {
    if delta == 1.0 {
        l
    } else {
        let q = 1.0 - 1.0 / delta;
        (q * l).exp() / q
    }
}

/// Realised objective of agent `i` on one path, given agent-major log-wealth.
fn path_objective(p: &Population, prep: &Prepared, grid: TimeGrid, i: usize, lw: &[f64]) -> f64 {
    let n = p.len();
    let m = grid.steps;
    let a = &p.agents[i];
    let shrink = a.theta / n as f64;
    let integrand = |j: usize| {
        let mut mean_log_cx = 0.0;
        for k in 0..n {
            mean_log_cx += prep.log_c[k][j] + lw[k * (m + 1) + j];
        }
        let own = prep.log_c[i][j] + lw[i * (m + 1) + j];
        utility_of_log(own - shrink * mean_log_cx, a.delta)
    };
    let mut running = 0.5 * (integrand(0) + integrand(m));
    for j in 1..m {
        running += integrand(j);
    }
    running *= grid.dt();

    let mean_log_x: f64 = (0..n).map(|k| lw[k * (m + 1) + m]).sum();
    let terminal = utility_of_log(lw[i * (m + 1) + m] - shrink * mean_log_x, a.delta);
    running + a.eps * terminal
}

/// Mean and Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub paths: usize,
}

/// Streaming mean/variance with an order-fixed merge.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct RunningStats {
    count: usize,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub(crate) fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub(crate) fn merge(&mut self, other: &RunningStats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let total = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / total;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / total;
        self.count += other.count;
    }

    pub(crate) fn estimate(&self) -> UtilityEstimate {
        let stderr = if self.count > 1 {
            (self.m2.max(0.0) / (self.count - 1) as f64 / self.count as f64).sqrt()
        } else {
            0.0
        };
        UtilityEstimate {
            mean: self.mean,
            stderr,
            paths: self.count,
        }
    }
}

pub fn estimate_objective(
    b: &SimulationBatch,
    s: &StrategyProfile,
    i: usize,
    p: &Population,
) -> Result<UtilityEstimate> {
    if i >= p.len() {
        return Err(Error::AgentIndex { index: i, n: p.len() });
    }
    if s.grid != b.grid {
        return Err(Error::InvalidGrid("batch and strategy grids differ".into()));
    }
    let prep = Prepared::new(p, s)?;
    let mut stats = RunningStats::default();
    for path in 0..b.paths {
        stats.push(path_objective(p, &prep, b.grid, i, b.log_wealth_path(path)));
    }
    Ok(stats.estimate())
}

/// Objectives of one agent under several strategy profiles, all driven by the
/// same Brownian paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedEstimates {
    pub estimates: Vec<UtilityEstimate>,
    /// Per-path `J(profile k) - J(profile 0)`.
    pub differences: Vec<UtilityEstimate>,
}

pub fn paired_objectives(
    p: &Population,
    profiles: &[StrategyProfile],
    agent: usize,
    paths: usize,
    seed: u64,
) -> Result<PairedEstimates> {
    if agent >= p.len() {
        return Err(Error::AgentIndex { index: agent, n: p.len() });
    }
    let first = profiles
        .first()
        .ok_or_else(|| Error::InvalidStrategy("no strategy profiles".into()))?;
    let grid = first.grid;
    if profiles.iter().any(|s| s.grid != grid) {
        return Err(Error::InvalidGrid("profiles use different grids".into()));
    }
    if paths == 0 {
        return Err(Error::InvalidGrid("need at least one path".into()));
    }
    let preps = profiles
        .iter()
        .map(|s| Prepared::new(p, s))
        .collect::<Result<Vec<_>>>()?;
    let sim = PathSimulator::new(p, grid, seed);
    let width = p.len() * (grid.steps + 1);
    let count = preps.len();

    let blocks: Vec<(Vec<RunningStats>, Vec<RunningStats>)> = (0..paths.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut values = vec![RunningStats::default(); count];
            let mut diffs = vec![RunningStats::default(); count];
            let mut lw = vec![0.0; width];
            for path in b * BLOCK..((b + 1) * BLOCK).min(paths) {
                let noise = sim.noise(path);
                let mut base = 0.0;
                for (k, prep) in preps.iter().enumerate() {
                    sim.log_wealth_into(prep, &noise, &mut lw);
                    let v = path_objective(p, prep, grid, agent, &lw);
                    if k == 0 {
                        base = v;
                    }
                    values[k].push(v);
                    diffs[k].push(v - base);
                }
            }
            (values, diffs)
        })
        .collect();

    let mut values = vec![RunningStats::default(); count];
    let mut diffs = vec![RunningStats::default(); count];
    for (v, d) in &blocks {
        for k in 0..count {
            values[k].merge(&v[k]);
            diffs[k].merge(&d[k]);
        }
    }
    Ok(PairedEstimates {
        estimates: values.iter().map(RunningStats::estimate).collect(),
        differences: diffs.iter().map(RunningStats::estimate).collect(),
    })
}

/// Evaluate `f` on the log-wealth of every path, in path order.
pub fn map_paths<T: Send>(
    p: &Population,
    s: &StrategyProfile,
    paths: usize,
    seed: u64,
    f: impl Fn(&[f64]) -> T + Sync,
) -> Result<Vec<T>> {
    let prep = Prepared::new(p, s)?;
    let grid = s.grid;
    let sim = PathSimulator::new(p, grid, seed);
    let width = p.len() * (grid.steps + 1);
    Ok((0..paths)
        .into_par_iter()
        .map_init(
            || vec![0.0; width],
            |lw, path| {
                let noise = sim.noise(path);
                sim.log_wealth_into(&prep, &noise, lw);
                f(lw)
            },
        )
        .collect())
}
