use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mfg::solve_mf;
use crate::nplayer::solve_n;
use crate::types::TypeDistribution;

/// Largest per-agent gap between the `n`-player equilibrium of the replicated
/// population and the mean-field value of the agent's atom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub pi_gap: f64,
    pub beta_gap: f64,
    pub lambda_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// `gap(row k+1) / gap(row k)` for the selected gap.
    pub fn ratios(&self, gap: impl Fn(&ConvergenceRow) -> f64) -> Vec<f64> {
        self.rows.windows(2).map(|w| gap(&w[1]) / gap(&w[0])).collect()
    }
}

pub fn mfg_convergence(d: &TypeDistribution, ns: &[usize]) -> Result<ConvergenceTable> {
    let mf = solve_mf(d)?;
    let rows = ns
        .iter()
        .map(|&n| {
            let (p, owner) = d.replicate(n)?;
            let e = solve_n(&p)?;
            let gap = |xs: &[f64], ys: &[f64]| {
                owner
                    .iter()
                    .enumerate()
                    .map(|(k, &a)| (xs[k] - ys[a]).abs())
                    .fold(0.0, f64::max)
            };
            Ok(ConvergenceRow {
                n,
                pi_gap: gap(&e.pi, &mf.pi),
                beta_gap: gap(&e.beta, &mf.beta),
                lambda_gap: gap(&e.lambda, &mf.lambda),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::types::{AgentType, Atom};

    fn atom(nu: f64) -> AgentType {
        AgentType { x0: 1.0, delta: 3.0, theta: 0.8, eps: 1.0, mu: 0.2, nu, sigma: 0.2 }
    }

    const NS: [usize; 7] = [4, 8, 16, 32, 64, 128, 256];

    #[test]
    fn common_noise_only_has_no_finite_n_effect() {
        let d = TypeDistribution::point(1.0, atom(0.0)).unwrap();
        let t = mfg_convergence(&d, &NS).unwrap();
        for r in &t.rows {
            assert!(r.pi_gap <= 1e-12, "{r:?}");
            assert!(r.beta_gap <= 1e-9, "{r:?}");
            assert_eq!(r.lambda_gap, 0.0);
        }
    }

    #[test]
    fn idiosyncratic_noise_converges_at_rate_one_over_n() {
        let d = TypeDistribution::point(1.0, atom(0.3)).unwrap();
        let t = mfg_convergence(&d, &NS).unwrap();
        for r in t.ratios(|r| r.beta_gap).into_iter().chain(t.ratios(|r| r.pi_gap)) {
            assert!((0.4..=0.6).contains(&r), "{r}");
        }
    }

    #[test]
    fn heterogeneous_atoms_map_to_owners() {
        let d = TypeDistribution::new(
            1.0,
            vec![
                Atom { weight: 0.25, agent: atom(0.3) },
                Atom { weight: 0.75, agent: AgentType { delta: 0.5, eps: 2.0, ..atom(0.1) } },
            ],
        )
        .unwrap();
        let t = mfg_convergence(&d, &[4, 64, 1024]).unwrap();
        assert!(t.rows[2].beta_gap < t.rows[1].beta_gap && t.rows[1].beta_gap < t.rows[0].beta_gap);
        assert!(t.rows[2].lambda_gap < 1e-2);
        assert!(matches!(
            mfg_convergence(&d, &[6]),
            Err(Error::NonReplicableWeights { n: 6 })
        ));
    }
}
