use super::config::InputConfig;
use super::csv::{num, Table};
use super::{CliError, RunConfig};
use crate::mfg::{
    aggregates_mf, beta_mf, delta_eff, lambda_mf, solve_mf as solve_distribution, theta_crit_mf, MfAggregates,
};
use crate::nplayer::{solve_n as solve_population, IDENTITY_TOL};
use crate::policy::{regime_report, ConsumptionPolicy, SingleStockContext};
use crate::simulation::{map_paths, RunningStats, StrategyProfile, TimeGrid};
use crate::types::{AgentType, TypeDistribution};
use crate::verification::{
    best_response_scan, fixed_point_check, mfg_convergence, ConvergenceTable, PerturbationGrid,
    VerificationReport, FIXED_POINT_TOL,
};

fn preamble(command: &str, input: &InputConfig) -> Table {
    let mut t = Table::default();
    t.comment(&format!("merton-arena {command}"));
    t.comment(&format!("config {}", input.echo));
    t
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn solve_n(_: &RunConfig, input: &InputConfig) -> Result<String, CliError> {
    let e = solve_population(input.population()?)?;
    let mut t = preamble("solve-n", input);
    t.scalar("phi", e.aggregates.phi).scalar("psi", e.aggregates.psi);
    if let Some(tc) = e.theta_crit {
        t.scalar("theta_crit", tc);
    }
    t.header(&["agent", "pi", "rho", "beta", "lambda"]);
    for k in 0..e.len() {
        t.row(&[k.to_string(), num(e.pi[k]), num(e.rho[k]), num(e.beta[k]), num(e.lambda[k])]);
    }
    Ok(t.finish())
}

pub fn solve_mf(_: &RunConfig, input: &InputConfig) -> Result<String, CliError> {
    let d = input.distribution()?;
    let e = solve_distribution(d)?;
    let mut t = preamble("solve-mf", input);
    t.scalar("phi", e.aggregates.phi).scalar("psi", e.aggregates.psi);
    if let Some(tc) = e.theta_crit {
        t.scalar("theta_crit", tc);
    }
    t.header(&["atom", "weight", "pi", "rho", "beta", "lambda", "delta_eff"]);
    for (k, atom) in d.atoms.iter().enumerate() {
        let de = e.delta_eff.as_ref().map(|v| v[k]);
        t.row(&[
            k.to_string(),
            num(atom.weight),
            num(e.pi[k]),
            num(e.rho[k]),
            num(e.beta[k]),
            num(e.lambda[k]),
            opt(de),
        ]);
    }
    Ok(t.finish())
}

fn time_points(horizon: f64, k: usize) -> Vec<f64> {
    (0..k)
        .map(|j| if j + 1 == k { horizon } else { horizon * j as f64 / (k - 1) as f64 })
        .collect()
}

/// Representative agent with `(delta, theta)` replaced, facing the distribution.
fn representative_policy(
    d: &TypeDistribution,
    agg: &MfAggregates,
    base: AgentType,
    delta: f64,
    theta: f64,
) -> Result<(AgentType, ConsumptionPolicy), CliError> {
    let agent = AgentType { delta, theta, ..base };
    agent.validate(0)?;
    let policy = ConsumptionPolicy::new(beta_mf(&agent, agg), lambda_mf(&agent, agg), d.horizon)?;
    Ok((agent, policy))
}

fn mf_header(t: &mut Table, d: &TypeDistribution, agg: &MfAggregates) -> Option<f64> {
    t.scalar("phi", agg.phi).scalar("psi", agg.psi);
    let tc = theta_crit_mf(d).ok();
    if let Some(tc) = tc {
        t.scalar("theta_crit", tc);
    }
    tc
}

pub fn curves(args: &RunConfig, input: &InputConfig) -> Result<String, CliError> {
    let mut t = preamble("curves", input);
    let (names, policies, horizon) = match &input.model {
        super::Model::Population(p) => {
            let e = solve_population(p)?;
            let names = (0..p.len()).map(|k| format!("agent_{k}")).collect::<Vec<_>>();
            (names, e.policies(), p.horizon)
        }
        super::Model::Distribution(d) => {
            let agg = aggregates_mf(d)?;
            mf_header(&mut t, d, &agg);
            let rep = input.representative_or_first(d);
            let deltas = args.deltas.clone().unwrap_or_else(|| vec![rep.delta]);
            let mut names = Vec::new();
            let mut policies = Vec::new();
            for &delta in &deltas {
                let (_, pol) = representative_policy(d, &agg, rep, delta, rep.theta)?;
                t.comment(&format!("delta={delta},beta,{},lambda,{}", num(pol.beta), num(pol.lambda)));
                names.push(format!("delta={delta}"));
                policies.push(pol);
            }
            (names, policies, d.horizon)
        }
    };
    let mut cols = vec!["t"];
    cols.extend(names.iter().map(String::as_str));
    t.header(&cols);
    for time in time_points(horizon, args.time_grid) {
        let mut row = vec![num(time)];
        for pol in &policies {
            row.push(num(pol.rate(time)?));
        }
        t.row(&row);
    }
    Ok(t.finish())
}

pub fn regime(args: &RunConfig, input: &InputConfig) -> Result<String, CliError> {
    let d = input.distribution()?;
    let tc = theta_crit_mf(d)?;
    let market = d.single_stock().expect("checked by theta_crit_mf");
    let agg = aggregates_mf(d)?;
    let rep = input.representative_or_first(d);
    let mut t = preamble("regime", input);
    mf_header(&mut t, d, &agg);
    let cond = 8.0 * market.sigma * market.sigma > market.mu * market.mu;
    t.comment(&format!("condition_8s2_gt_m2,{cond}"));
    t.header(&["delta", "theta", "regime", "beta", "lambda", "delta_eff", "band_lo", "band_hi"]);
    for &theta in &args.theta_range.points() {
        for &delta in &args.delta_range.points() {
            let (agent, pol) = representative_policy(d, &agg, rep, delta, theta)?;
            let ctx = SingleStockContext { mu: market.mu, sigma: market.sigma, theta, theta_crit: tc };
            let report = regime_report(pol.beta, pol.lambda, Some(ctx));
            t.row(&[
                num(delta),
                num(theta),
                report.regime.code().to_string(),
                num(pol.beta),
                num(pol.lambda),
                num(delta_eff(&agent, tc)),
                opt(report.band.map(|b| b.0)),
                opt(report.band.map(|b| b.1)),
            ]);
        }
    }
    Ok(t.finish())
}

pub fn sweep(args: &RunConfig, input: &InputConfig) -> Result<String, CliError> {
    let d = input.distribution()?;
    let agg = aggregates_mf(d)?;
    let rep = input.representative_or_first(d);
    let mut t = preamble("sweep", input);
    mf_header(&mut t, d, &agg);
    let half = 0.5 * d.horizon;
    t.scalar("t", half);
    t.header(&["delta", "theta", "consumption", "beta", "lambda"]);
    for &theta in &args.theta_range.points() {
        for &delta in &args.delta_range.points() {
            let (_, pol) = representative_policy(d, &agg, rep, delta, theta)?;
            t.row(&[num(delta), num(theta), num(pol.rate(half)?), num(pol.beta), num(pol.lambda)]);
        }
    }
    Ok(t.finish())
}

/// Linear interpolation between order statistics of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn simulate(args: &RunConfig, input: &InputConfig) -> Result<String, CliError> {
    let p = input.population()?;
    let grid = TimeGrid::new(p.horizon, args.grid)?;
    let strategy = match &input.strategy {
        Some(s) => {
            if s.len() != p.len() {
                return Err(CliError::Usage(format!(
                    "strategy has {} entries for {} agents",
                    s.len(),
                    p.len()
                )));
            }
            let pis: Vec<f64> = s.iter().map(|x| x.pi).collect();
            StrategyProfile::from_fns(grid, &pis, |k, _| s[k].consumption)?
        }
        None => StrategyProfile::equilibrium(&solve_population(p)?, grid)?,
    };
    let k = args.time_grid.min(grid.steps + 1);
    let nodes: Vec<usize> = (0..k).map(|l| l * grid.steps / (k - 1)).collect();
    let n = p.len();
    let m = grid.steps;
    let samples = map_paths(p, &strategy, args.paths, args.seed, |lw| {
        let mut v = Vec::with_capacity(n * k);
        for a in 0..n {
            v.extend(nodes.iter().map(|&j| lw[a * (m + 1) + j]));
        }
        v
    })?;

    let mut t = preamble("simulate", input);
    t.comment(&format!("paths,{}", args.paths));
    t.comment(&format!("steps,{}", m));
    t.comment(&format!("seed,{}", args.seed));
    t.header(&["t", "agent", "mean", "stderr", "q05", "q25", "q50", "q75", "q95"]);
    let mut column = vec![0.0; samples.len()];
    for a in 0..n {
        for (l, &j) in nodes.iter().enumerate() {
            let mut stats = RunningStats::default();
            for (x, s) in column.iter_mut().zip(&samples) {
                *x = s[a * k + l];
                stats.push(*x);
            }
            column.sort_by(f64::total_cmp);
            let est = stats.estimate();
            let mut row = vec![num(grid.time(j)), a.to_string(), num(est.mean), num(est.stderr)];
            row.extend([0.05, 0.25, 0.5, 0.75, 0.95].iter().map(|&q| num(quantile(&column, q))));
            t.row(&row);
        }
    }
    Ok(t.finish())
}

/// Gaps must not grow as `n` doubles.
fn convergence_passes(table: &ConvergenceTable) -> bool {
    table.rows.windows(2).all(|w| {
        let (a, b) = (&w[0], &w[1]);
        b.pi_gap <= a.pi_gap + 1e-12 && b.beta_gap <= a.beta_gap + 1e-12 && b.lambda_gap <= a.lambda_gap + 1e-12
    })
}

pub fn verify(args: &RunConfig, input: &InputConfig) -> Result<(String, bool), CliError> {
    let p = input.population()?;
    let e = solve_population(p)?;
    let fixed = fixed_point_check(p, &e, args.steps)?;
    let identity_ok = fixed.identity_residual <= IDENTITY_TOL * e.aggregates.ratio.abs().max(1.0);

    let agents = args.agent.clone().unwrap_or_else(|| (0..p.len()).collect());
    let grid = TimeGrid::new(p.horizon, args.grid)?;
    let strategy = StrategyProfile::equilibrium(&e, grid)?;
    let pert = PerturbationGrid::standard();
    let best_response = agents
        .iter()
        .map(|&i| best_response_scan(p, &strategy, i, &pert, args.paths.max(2), args.seed))
        .collect::<Result<Vec<_>, _>>()?;

    let ns: Vec<usize> = (0..7).map(|k| p.len() << k).collect();
    let convergence = mfg_convergence(&p.empirical_distribution(), &ns)?;

    let passed = fixed.passes(FIXED_POINT_TOL)
        && identity_ok
        && best_response.iter().all(|r| r.passed)
        && convergence_passes(&convergence);
    let report = VerificationReport {
        fixed_point: fixed,
        best_response,
        convergence: Some(convergence),
        passed,
    };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    Ok((text, passed))
}
