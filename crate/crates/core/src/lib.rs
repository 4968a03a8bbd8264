//! Competitive CRRA investment/consumption equilibria for `n` agents and the
//! mean-field limit, with an ODE oracle and Monte Carlo best-response checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod mfg;
pub mod nplayer;
pub mod policy;
pub mod rng;
pub mod simulation;
pub mod types;
pub mod verification;

pub use error::{Error, Result};
pub use mfg::{solve_mf, MfAggregates, MfEquilibrium};
pub use nplayer::{solve_n, Aggregates, EquilibriumProfile};
pub use policy::{classify_regime, ConsumptionPolicy, Regime};
pub use types::{AgentType, Atom, Population, SingleStockMarket, TypeDistribution};
