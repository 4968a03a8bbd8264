use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("agent {index}: parameter `{field}` must be positive (got {value})")]
    NonPositiveParameter {
        field: &'static str,
        index: usize,
        value: f64,
    },
    #[error("agent {index}: competition weight theta = {value} outside [0, 1]")]
    ThetaOutOfRange { index: usize, value: f64 },
    #[error("agent {index}: sigma + nu must be strictly positive")]
    DegenerateVolatility { index: usize },
    #[error("population needs at least 2 agents (got {n})")]
    TooFewAgents { n: usize },
    #[error("horizon must be positive (got {0})")]
    NonPositiveHorizon(f64),
    #[error("invalid type distribution: {0}")]
    InvalidWeights(String),
    #[error("degenerate aggregate: 1 + psi = {0} is not positive")]
    DegenerateAggregate(f64),
    #[error("division by zero in {0}")]
    DivisionByZero(&'static str),
    #[error("volatility identity violated: residual {residual:e}")]
    IdentityViolation { residual: f64 },
    #[error("single-stock closed form mismatch for atom {index}: {detail}")]
    SingleStockMismatch { index: usize, detail: String },
    #[error("population is not a single-stock market")]
    NotSingleStock,
    #[error("time {t} outside [0, {horizon}]")]
    OutOfDomain { t: f64, horizon: f64 },
    #[error("utility argument must be positive (got {0})")]
    DomainError(f64),
    #[error("invalid simulation grid: {0}")]
    InvalidGrid(String),
    #[error("agent {agent}: consumption must be strictly positive and finite on the grid")]
    NonPositiveConsumption { agent: usize },
    #[error("invalid strategy profile: {0}")]
    InvalidStrategy(String),
    #[error("Bernoulli oracle produced non-positive u = {value} at t = {t}")]
    NonPositiveSolution { t: f64, value: f64 },
    #[error(
        "profitable deviation for agent {agent} at (dpi={dpi}, a={a}, b={b}): \
         mean gain {gain:e} > 3 * stderr {stderr:e}"
    )]
    ProfitableDeviationFound {
        agent: usize,
        dpi: f64,
        a: f64,
        b: f64,
        gain: f64,
        stderr: f64,
    },
    #[error("weights cannot be replicated exactly by {n} agents")]
    NonReplicableWeights { n: usize },
    #[error("agent index {index} out of range for {n} agents")]
    AgentIndex { index: usize, n: usize },
}

impl Error {
    /// True for errors caused by bad user input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::NonPositiveParameter { .. }
                | Error::ThetaOutOfRange { .. }
                | Error::DegenerateVolatility { .. }
                | Error::TooFewAgents { .. }
                | Error::NonPositiveHorizon(_)
                | Error::InvalidWeights(_)
                | Error::NotSingleStock
                | Error::OutOfDomain { .. }
                | Error::InvalidGrid(_)
                | Error::InvalidStrategy(_)
                | Error::NonPositiveConsumption { .. }
                | Error::NonReplicableWeights { .. }
                | Error::AgentIndex { .. }
        )
    }
}
