//! Paired Monte Carlo test of unilateral deviations.
//!
//! Agent `i` deviates to `(pi_i + dpi, c_i(t) e^{a + b t})` while the others
//! keep their strategies. The deviation leaves the other agents' wealth
//! untouched and shifts agent `i`'s log-wealth by
//! `D(t; dpi, a, b) + dpi G(t)`, with `D` deterministic and
//! `G(t) = int_0^t (sigma_i dB + nu_i dW^i)`. Each path is simulated once and
//! every cell is obtained from it by that shift, so all cells share noise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nplayer::EquilibriumProfile;
use crate::simulation::{
    PathSimulator, Prepared, RunningStats, StrategyProfile, TimeGrid, UtilityEstimate, BLOCK,
};
use crate::types::Population;

/// One-sided significance multiplier.
pub const SIGNIFICANCE: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationGrid {
    pub dpi: Vec<f64>,
    /// `(a, b)` pairs of the consumption tilt `e^{a + b t}`.
    pub tilts: Vec<(f64, f64)>,
}

impl PerturbationGrid {
    pub fn product(dpi: &[f64], a: &[f64], b: &[f64]) -> Self {
        PerturbationGrid {
            dpi: dpi.to_vec(),
            tilts: a.iter().flat_map(|&x| b.iter().map(move |&y| (x, y))).collect(),
        }
    }

    /// `dpi` in `{0, +-0.1, +-0.5}`, `a` and `b` in `{0, +-0.05, +-0.2}`.
    pub fn standard() -> Self {
        let tilt = [-0.2, -0.05, 0.0, 0.05, 0.2];
        Self::product(&[-0.5, -0.1, 0.0, 0.1, 0.5], &tilt, &tilt)
    }

    pub fn len(&self) -> usize {
        self.dpi.len() * self.tilts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::InvalidStrategy("empty perturbation grid".into()));
        }
        let finite = self.dpi.iter().all(|x| x.is_finite())
            && self.tilts.iter().all(|(a, b)| a.is_finite() && b.is_finite());
        if !finite {
            return Err(Error::InvalidStrategy("non-finite perturbation".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestResponseCell {
    pub dpi: f64,
    pub a: f64,
    pub b: f64,
    /// Mean of `J(deviation) - J(equilibrium)` over paths.
    pub mean_difference: f64,
    pub stderr: f64,
}

impl BestResponseCell {
    pub fn is_profitable(&self) -> bool {
        self.mean_difference > SIGNIFICANCE * self.stderr
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResponseReport {
    pub agent: usize,
    pub steps: usize,
    pub seed: u64,
    pub equilibrium: UtilityEstimate,
    pub cells: Vec<BestResponseCell>,
    /// Cell with the largest mean difference.
    pub worst: BestResponseCell,
    pub passed: bool,
}

/// Deterministic part of one cell: `value = dot(features, weights) + offset`.
struct CellWeights {
    weights: Vec<f64>,
    offset: f64,
}

struct Scan<'a> {
    p: &'a Population,
    s: &'a StrategyProfile,
    i: usize,
    prep: Prepared,
    sim: PathSimulator,
    grid: TimeGrid,
    /// `(1 - theta_i / n)`: sensitivity of relative log-wealth to own log-wealth.
    own_share: f64,
    /// Indexed `[dpi][tilt]`.
    cells: Vec<Vec<CellWeights>>,
    null: Vec<CellWeights>,
}

impl<'a> Scan<'a> {
    fn new(
        p: &'a Population,
        s: &'a StrategyProfile,
        i: usize,
        pert: &PerturbationGrid,
        seed: u64,
    ) -> Result<Self> {
        let grid = s.grid();
        let prep = Prepared::new(p, s)?;
        let n = p.len() as f64;
        let own_share = 1.0 - p.agents[i].theta / n;
        let mut scan = Scan {
            p,
            s,
            i,
            prep,
            sim: PathSimulator::new(p, grid, seed),
            grid,
            own_share,
            cells: Vec::new(),
            null: Vec::new(),
        };
        scan.cells = pert
            .dpi
            .iter()
            .map(|&d| pert.tilts.iter().map(|&(a, b)| scan.cell_weights(d, a, b)).collect())
            .collect();
        scan.null = vec![scan.cell_weights(0.0, 0.0, 0.0)];
        Ok(scan)
    }

    /// Trapezoid weights on the nodes plus the terminal bequest weight.
    fn base_weights(&self) -> Vec<f64> {
        let m = self.grid.steps;
        let dt = self.grid.dt();
        let mut w = vec![dt; m + 2];
        w[0] = 0.5 * dt;
        w[m] = 0.5 * dt;
        w[m + 1] = self.p.agents[self.i].eps;
        w
    }

    fn cell_weights(&self, dpi: f64, a: f64, b: f64) -> CellWeights {
        let m = self.grid.steps;
        let dt = self.grid.dt();
        let ag = &self.p.agents[self.i];
        let pi = self.s.pi(self.i);
        let c = self.s.consumption(self.i);
        let bumped: Vec<f64> = (0..=m)
            .map(|j| c[j] * (a + b * self.grid.time(j)).exp() - c[j])
            .collect();
        // shift of log-wealth on the nodes, plus the log-consumption tilt
        let mut shift = vec![0.0; m + 2];
        let mut drift = 0.0;
        for j in 0..m {
            let np = pi[j] + dpi;
            drift += (dpi * ag.mu - 0.5 * (np * np - pi[j] * pi[j]) * ag.big_sigma()) * dt
                - 0.5 * dt * (bumped[j] + bumped[j + 1]);
            shift[j + 1] = drift;
        }
        shift[m + 1] = drift;
        for (j, x) in shift.iter_mut().take(m + 1).enumerate() {
            *x += a + b * self.grid.time(j);
        }
        let base = self.base_weights();
        if ag.delta == 1.0 {
            let offset = base
                .iter()
                .zip(&shift)
                .map(|(w, k)| w * self.own_share * k)
                .sum();
            CellWeights { weights: base, offset }
        } else {
            let q = ag.utility_exponent();
            let weights = base
                .iter()
                .zip(&shift)
                .map(|(w, k)| w * (q * self.own_share * k).exp() / q)
                .collect();
            CellWeights { weights, offset: 0.0 }
        }
    }

    /// Features of one path: relative log-utility argument shifted by `dpi G`,
    /// passed through the utility when `delta != 1`.
    fn features(&self, rel: &[f64], g: &[f64], dpi: f64, out: &mut [f64]) {
        let ag = &self.p.agents[self.i];
        let k = self.own_share * dpi;
        if ag.delta == 1.0 {
            for ((o, r), x) in out.iter_mut().zip(rel).zip(g) {
                *o = r + k * x;
            }
        } else {
            let q = ag.utility_exponent();
            for ((o, r), x) in out.iter_mut().zip(rel).zip(g) {
                *o = (q * (r + k * x)).exp();
            }
        }
    }

    fn value(features: &[f64], cell: &CellWeights) -> f64 {
        features.iter().zip(&cell.weights).map(|(f, w)| f * w).sum::<f64>() + cell.offset
    }

    /// Relative log-arguments `rel` (nodes then terminal) and own noise integral `g`.
    fn path_inputs(&self, path: usize, lw: &mut [f64], rel: &mut [f64], g: &mut [f64]) {
        let m = self.grid.steps;
        let n = self.p.len();
        let i = self.i;
        let shrink = self.p.agents[i].theta / n as f64;
        let noise = self.sim.noise(path);
        self.sim.log_wealth_into(&self.prep, &noise, lw);
        for j in 0..=m {
            let mut total = 0.0;
            for k in 0..n {
                total += self.prep.log_c[k][j] + lw[k * (m + 1) + j];
            }
            rel[j] = self.prep.log_c[i][j] + lw[i * (m + 1) + j] - shrink * total;
        }
        let terminal: f64 = (0..n).map(|k| lw[k * (m + 1) + m]).sum();
        rel[m + 1] = lw[i * (m + 1) + m] - shrink * terminal;

        let ag = &self.p.agents[i];
        let dw = &noise.idiosyncratic[i * m..(i + 1) * m];
        let mut acc = 0.0;
        g[0] = 0.0;
        for j in 0..m {
            acc += ag.sigma * noise.common[j] + ag.nu * dw[j];
            g[j + 1] = acc;
        }
        g[m + 1] = acc;
    }

    fn run(&self, pert: &PerturbationGrid, paths: usize) -> (RunningStats, Vec<RunningStats>) {
        let m = self.grid.steps;
        let width = self.p.len() * (m + 1);
        let count = pert.len();
        let tilts = pert.tilts.len();
        let blocks: Vec<(RunningStats, Vec<RunningStats>)> = (0..paths.div_ceil(BLOCK))
            .into_par_iter()
            .map(|blk| {
                let mut base_stats = RunningStats::default();
                let mut diffs = vec![RunningStats::default(); count];
                let mut lw = vec![0.0; width];
                let mut rel = vec![0.0; m + 2];
                let mut g = vec![0.0; m + 2];
                let mut feat = vec![0.0; m + 2];
                for path in blk * BLOCK..((blk + 1) * BLOCK).min(paths) {
                    self.path_inputs(path, &mut lw, &mut rel, &mut g);
                    self.features(&rel, &g, 0.0, &mut feat);
                    let base = Self::value(&feat, &self.null[0]);
                    base_stats.push(base);
                    for (d, &dpi) in pert.dpi.iter().enumerate() {
                        self.features(&rel, &g, dpi, &mut feat);
                        for (t, cell) in self.cells[d].iter().enumerate() {
                            diffs[d * tilts + t].push(Self::value(&feat, cell) - base);
                        }
                    }
                }
                (base_stats, diffs)
            })
            .collect();
        let mut base = RunningStats::default();
        let mut diffs = vec![RunningStats::default(); count];
        for (b, d) in &blocks {
            base.merge(b);
            for (acc, x) in diffs.iter_mut().zip(d) {
                acc.merge(x);
            }
        }
        (base, diffs)
    }
}

/// Evaluate every cell of `pert` for agent `i` against the strategies `s`.
pub fn best_response_scan(
    p: &Population,
    s: &StrategyProfile,
    i: usize,
    pert: &PerturbationGrid,
    paths: usize,
    seed: u64,
) -> Result<BestResponseReport> {
    if i >= p.len() {
        return Err(Error::AgentIndex { index: i, n: p.len() });
    }
    if paths < 2 {
        return Err(Error::InvalidGrid("need at least two paths".into()));
    }
    pert.validate()?;
    let scan = Scan::new(p, s, i, pert, seed)?;
    let (base, diffs) = scan.run(pert, paths);
    let tilts = pert.tilts.len();
    let cells: Vec<BestResponseCell> = diffs
        .iter()
        .enumerate()
        .map(|(k, st)| {
            let est = st.estimate();
            let (a, b) = pert.tilts[k % tilts];
            BestResponseCell {
                dpi: pert.dpi[k / tilts],
                a,
                b,
                mean_difference: est.mean,
                stderr: est.stderr,
            }
        })
        .collect();
    let worst = *cells
        .iter()
        .max_by(|x, y| x.mean_difference.total_cmp(&y.mean_difference))
        .expect("non-empty grid");
    let passed = cells.iter().all(|c| !c.is_profitable());
    Ok(BestResponseReport {
        agent: i,
        steps: scan.grid.steps,
        seed,
        equilibrium: base.estimate(),
        cells,
        worst,
        passed,
    })
}

/// Hold every agent but `i` at the equilibrium and scan `i`'s deviations.
/// Fails with [`Error::ProfitableDeviationFound`] on the first significant gain.
pub fn best_response_test(
    p: &Population,
    e: &EquilibriumProfile,
    i: usize,
    pert: &PerturbationGrid,
    steps: usize,
    paths: usize,
    seed: u64,
) -> Result<BestResponseReport> {
    let grid = TimeGrid::new(p.horizon, steps)?;
    let s = StrategyProfile::equilibrium(e, grid)?;
    let report = best_response_scan(p, &s, i, pert, paths, seed)?;
    if let Some(c) = report.cells.iter().find(|c| c.is_profitable()) {
        return Err(Error::ProfitableDeviationFound {
            agent: i,
            dpi: c.dpi,
            a: c.a,
            b: c.b,
            gain: c.mean_difference,
            stderr: c.stderr,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nplayer::solve_n;
    use crate::simulation::paired_objectives;
    use crate::types::AgentType;

    fn merton_pair() -> Population {
        let log = AgentType { x0: 1.0, delta: 1.0, theta: 0.0, eps: 1.0, mu: 0.1, nu: 0.0, sigma: 0.2 };
        let other = AgentType { delta: 2.0, theta: 0.5, ..log };
        Population::new(1.0, vec![log, other]).unwrap()
    }

    #[test]
    fn matches_resimulated_deviation() {
        let p = merton_pair();
        let mut q = p.clone();
        q.agents[1].nu = 0.1;
        for pop in [p, q] {
            let e = solve_n(&pop).unwrap();
            let grid = TimeGrid::new(1.0, 50).unwrap();
            let s = StrategyProfile::equilibrium(&e, grid).unwrap();
            let pert = PerturbationGrid::product(&[0.3], &[0.1], &[-0.2]);
            for agent in 0..2 {
                let report = best_response_scan(&pop, &s, agent, &pert, 300, 9).unwrap();
                let pi = s.pi(agent).iter().map(|x| x + 0.3).collect();
                let c = (0..=50)
                    .map(|j| s.consumption(agent)[j] * (0.1 - 0.2 * grid.time(j)).exp())
                    .collect();
                let dev = s.with_agent(agent, pi, c).unwrap();
                let direct = paired_objectives(&pop, &[s.clone(), dev], agent, 300, 9).unwrap();
                assert!((report.equilibrium.mean - direct.estimates[0].mean).abs() < 1e-10);
                let cell = report.cells[0];
                assert!((cell.mean_difference - direct.differences[1].mean).abs() < 1e-10);
                assert!((cell.stderr - direct.differences[1].stderr).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn null_cell_is_exactly_zero() {
        let p = merton_pair();
        let e = solve_n(&p).unwrap();
        let pert = PerturbationGrid::product(&[0.0, 0.1], &[0.0], &[0.0, 0.05]);
        for agent in 0..2 {
            let r = best_response_test(&p, &e, agent, &pert, 40, 200, 1).unwrap();
            assert_eq!(r.cells[0].mean_difference, 0.0);
            assert_eq!(r.cells[0].stderr, 0.0);
        }
    }

    #[test]
    fn merton_overinvestment_loses() {
        let p = merton_pair();
        let e = solve_n(&p).unwrap();
        let ag = p.agents[0];
        assert!((e.pi[0] - ag.mu / ag.big_sigma()).abs() < 1e-12);
        let pert = PerturbationGrid::product(&[1.0], &[0.0], &[0.0]);
        let r = best_response_test(&p, &e, 0, &pert, 100, 4000, 3).unwrap();
        let expected = -0.5 * ag.big_sigma() * (0.5 + ag.eps);
        let cell = r.cells[0];
        assert!(cell.mean_difference < -SIGNIFICANCE * cell.stderr);
        assert!((cell.mean_difference - expected).abs() < 4.0 * cell.stderr);
    }

    #[test]
    fn detects_planted_gain() {
        // scanning around a deliberately poor strategy must flag the improvement
        let p = merton_pair();
        let e = solve_n(&p).unwrap();
        let grid = TimeGrid::new(1.0, 40).unwrap();
        let s = StrategyProfile::equilibrium(&e, grid).unwrap();
        let bad = s.with_agent(0, vec![e.pi[0] + 1.0; 40], s.consumption(0).to_vec()).unwrap();
        let pert = PerturbationGrid::product(&[-1.0], &[0.0], &[0.0]);
        let r = best_response_scan(&p, &bad, 0, &pert, 2000, 5).unwrap();
        assert!(!r.passed);
        assert!(r.worst.is_profitable());
    }
}
