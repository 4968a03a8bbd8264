//! Minimal CSV output with `#` comment headers, and the reader for
//! `solve-n` tables.

use std::fmt::Write as _;

use super::config::InputConfig;
use super::CliError;
use crate::nplayer::{Aggregates, EquilibriumProfile};
use crate::types::Population;

/// 17 significant digits: parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Default)]
pub struct Table {
    text: String,
}

impl Table {
    pub fn comment(&mut self, line: &str) -> &mut Self {
        let _ = writeln!(self.text, "# {line}");
        self
    }

    pub fn scalar(&mut self, name: &str, x: f64) -> &mut Self {
        self.comment(&format!("{name},{}", num(x)))
    }

    pub fn header(&mut self, cols: &[&str]) -> &mut Self {
        let _ = writeln!(self.text, "{}", cols.join(","));
        self
    }

    pub fn row(&mut self, fields: &[String]) -> &mut Self {
        let _ = writeln!(self.text, "{}", fields.join(","));
        self
    }

    pub fn finish(self) -> String {
        self.text
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Usage(format!("malformed solve-n table: {}", msg.into()))
}

fn parse_num(s: &str) -> Result<f64, CliError> {
    s.trim().parse().map_err(|_| bad(format!("not a number: {s:?}")))
}

/// Rebuild the population and equilibrium from `solve-n` output.
pub fn read_solve_n(text: &str) -> Result<(Population, EquilibriumProfile), CliError> {
    let mut config = None;
    let (mut phi, mut psi, mut theta_crit) = (None, None, None);
    let mut rows = Vec::new();
    for line in text.lines() {
        if let Some(c) = line.strip_prefix("# ") {
            if let Some(json) = c.strip_prefix("config ") {
                config = Some(InputConfig::parse(json)?);
            } else if let Some((k, v)) = c.split_once(',') {
                match k {
                    "phi" => phi = Some(parse_num(v)?),
                    "psi" => psi = Some(parse_num(v)?),
                    "theta_crit" => theta_crit = Some(parse_num(v)?),
                    _ => {}
                }
            }
        } else if !line.is_empty() && !line.starts_with("agent") {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad(format!("expected 5 fields in {line:?}")));
            }
            rows.push([parse_num(f[1])?, parse_num(f[2])?, parse_num(f[3])?, parse_num(f[4])?]);
        }
    }
    let population = config.ok_or_else(|| bad("no config line"))?.population()?.clone();
    let (phi, psi) = (phi.ok_or_else(|| bad("no phi"))?, psi.ok_or_else(|| bad("no psi"))?);
    if rows.len() != population.len() {
        return Err(bad(format!("{} rows for {} agents", rows.len(), population.len())));
    }
    let profile = EquilibriumProfile {
        horizon: population.horizon,
        pi: rows.iter().map(|r| r[0]).collect(),
        rho: rows.iter().map(|r| r[1]).collect(),
        beta: rows.iter().map(|r| r[2]).collect(),
        lambda: rows.iter().map(|r| r[3]).collect(),
        aggregates: Aggregates { phi, psi, ratio: phi / (1.0 + psi) },
        theta_crit,
    };
    Ok((population, profile))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.218_934_911_242_604, 1e-300, 6.02e23] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }
}
