use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::types::{AgentType, Atom, Population, TypeDistribution};

/// Constant strategy for one agent in a `simulate` config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantStrategy {
    pub pi: f64,
    pub consumption: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RawConfig {
    horizon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    agents: Option<Vec<AgentType>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    atoms: Option<Vec<Atom>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    representative: Option<AgentType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    strategy: Option<Vec<ConstantStrategy>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Population(Population),
    Distribution(TypeDistribution),
}

/// A parsed and validated input file.
#[derive(Debug, Clone, PartialEq)]
pub struct InputConfig {
    pub model: Model,
    /// Test agent for mean-field curves; defaults to the first atom.
    pub representative: Option<AgentType>,
    pub strategy: Option<Vec<ConstantStrategy>>,
    /// Compact JSON of the input, echoed into output headers.
    pub echo: String,
}

impl InputConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw: RawConfig = serde_json::from_str(text)?;
        let model = match (raw.agents.clone(), raw.atoms.clone()) {
            (Some(agents), None) => Model::Population(Population::new(raw.horizon, agents)?),
            (None, Some(atoms)) => Model::Distribution(TypeDistribution::new(raw.horizon, atoms)?),
            _ => {
                return Err(CliError::Usage(
                    "config needs exactly one of \"agents\" or \"atoms\"".into(),
                ))
            }
        };
        if let Some(r) = &raw.representative {
            r.validate(0)?;
        }
        let echo = serde_json::to_string(&raw)?;
        Ok(InputConfig {
            model,
            representative: raw.representative,
            strategy: raw.strategy,
            echo,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn population(&self) -> Result<&Population, CliError> {
        match &self.model {
            Model::Population(p) => Ok(p),
            Model::Distribution(_) => Err(CliError::Usage(
                "this command needs a population config (\"agents\")".into(),
            )),
        }
    }

    pub fn distribution(&self) -> Result<&TypeDistribution, CliError> {
        match &self.model {
            Model::Distribution(d) => Ok(d),
            Model::Population(_) => Err(CliError::Usage(
                "this command needs a distribution config (\"atoms\")".into(),
            )),
        }
    }

    pub fn representative_or_first(&self, d: &TypeDistribution) -> AgentType {
        self.representative.unwrap_or(d.atoms[0].agent)
    }
}
