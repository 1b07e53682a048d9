use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::EnvError;

/// Discrete action index. Every bundled environment uses discrete action spaces.
pub type Action = usize;

/// Per-agent auxiliary key/value data (legal-action masks, positions, diagnostics).
pub type Info = BTreeMap<String, serde_json::Value>;

/// Name reserved for the environment actor.
pub const ENV_AGENT: &str = "env";

/// Identifier of an actor inside one environment instance.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AgentId(String);

impl AgentId {
    pub fn new(name: impl Into<String>) -> Result<Self, EnvError> {
        let name = name.into();
        if name.is_empty() {
            return Err(EnvError::EmptyAgentId);
        }
        Ok(Self(name))
    }

    /// The environment actor, `"env"`.
    pub fn env() -> Self {
        Self(ENV_AGENT.to_string())
    }

    /// Builds `<prefix>_<index>`, the naming scheme of the bundled environments.
    pub fn indexed(prefix: &str, index: usize) -> Self {
        Self(format!("{prefix}_{index}"))
    }

    pub fn is_env(&self) -> bool {
        self.0 == ENV_AGENT
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for AgentId {
    type Error = EnvError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        AgentId::new(value)
    }
}

impl From<AgentId> for String {
    fn from(value: AgentId) -> Self {
        value.0
    }
}

impl TryFrom<&str> for AgentId {
    type Error = EnvError;

    fn try_from(value: &str) -> Result<Self, Self::Error> {
        AgentId::new(value)
    }
}

/// Declared action or observation space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceSpec {
    Discrete { n: usize },
    Box { shape: Vec<usize>, low: f64, high: f64 },
}

impl SpaceSpec {
    pub fn discrete(n: usize) -> Self {
        SpaceSpec::Discrete { n }
    }

    pub fn unit_box(shape: Vec<usize>) -> Self {
        SpaceSpec::Box { shape, low: 0.0, high: 1.0 }
    }

    /// Checks the structural invariants: `n >= 1`, `low <= high`, every extent `>= 1`.
    pub fn validate(&self) -> Result<(), String> {
        match self {
            SpaceSpec::Discrete { n } if *n == 0 => Err("discrete space with n = 0".into()),
            SpaceSpec::Discrete { .. } => Ok(()),
            SpaceSpec::Box { shape, low, high } => {
                if low.is_nan() || high.is_nan() || low > high {
                    return Err(format!("box bounds low={low} high={high}"));
                }
                if shape.contains(&0) {
                    return Err(format!("box shape {shape:?} has a zero extent"));
                }
                Ok(())
            }
        }
    }

    /// Number of discrete actions, `None` for box spaces.
    pub fn n(&self) -> Option<usize> {
        match self {
            SpaceSpec::Discrete { n } => Some(*n),
            SpaceSpec::Box { .. } => None,
        }
    }

    pub fn contains_action(&self, action: Action) -> bool {
        matches!(self, SpaceSpec::Discrete { n } if action < *n)
    }

    pub fn contains(&self, obs: &Observation) -> bool {
        match (self, obs) {
            (SpaceSpec::Discrete { n }, Observation::Discrete(v)) => v < n,
            (SpaceSpec::Box { shape, low, high }, Observation::Tensor { shape: s, data }) => {
                shape == s
                    && data.len() == shape.iter().product::<usize>()
                    && data.iter().all(|&x| (x as f64) >= *low && (x as f64) <= *high)
            }
            _ => false,
        }
    }
}

/// An observation of one agent, or the global state of an environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observation {
    Discrete(usize),
    Tensor { shape: Vec<usize>, data: Vec<f32> },
}

impl Observation {
    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Observation::Tensor { shape, data: vec![0.0; len] }
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            Observation::Discrete(_) => &[],
            Observation::Tensor { shape, .. } => shape,
        }
    }

    pub fn data(&self) -> &[f32] {
        match self {
            Observation::Discrete(_) => &[],
            Observation::Tensor { data, .. } => data,
        }
    }

    /// Element at a row-major index tuple. Panics on out-of-range indices.
    pub fn at(&self, index: &[usize]) -> f32 {
        match self {
            Observation::Discrete(v) => *v as f32,
            Observation::Tensor { shape, data } => data[flat_index(shape, index)],
        }
    }

    pub fn set(&mut self, index: &[usize], value: f32) {
        if let Observation::Tensor { shape, data } = self {
            let i = flat_index(shape, index);
            data[i] = value;
        }
    }
}

fn flat_index(shape: &[usize], index: &[usize]) -> usize {
    assert_eq!(shape.len(), index.len(), "index rank mismatch");
    shape.iter().zip(index).fold(0, |acc, (&dim, &i)| {
        assert!(i < dim, "index {i} out of range for extent {dim}");
        acc * dim + i
    })
}

/// Result of `state()`: environments may opt out of exposing a global state.
#[derive(Clone, Debug, PartialEq)]
pub enum GlobalState {
    Tensor(Observation),
    Unsupported,
}

impl GlobalState {
    pub fn tensor(&self) -> Option<&Observation> {
        match self {
            GlobalState::Tensor(t) => Some(t),
            GlobalState::Unsupported => None,
        }
    }
}

/// Bookkeeping every sequential environment exposes after `reset`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnvStatus {
    pub agents: Vec<AgentId>,
    pub possible_agents: Option<Vec<AgentId>>,
    pub agent_selection: Option<AgentId>,
    /// Instantaneous rewards produced by the most recent `step`.
    pub rewards: BTreeMap<AgentId, f64>,
    /// Rewards accumulated since each agent last acted.
    pub cumulative_rewards: BTreeMap<AgentId, f64>,
    pub dones: BTreeMap<AgentId, bool>,
    pub infos: BTreeMap<AgentId, Info>,
}

impl EnvStatus {
    pub fn is_done(&self, agent: &AgentId) -> bool {
        self.dones.get(agent).copied().unwrap_or(false)
    }

    pub fn contains(&self, agent: &AgentId) -> bool {
        self.agents.contains(agent)
    }
}

/// One applied step, as recorded in trajectories.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub t: u64,
    pub agent: AgentId,
    pub action: Option<Action>,
    pub rewards_emitted: BTreeMap<AgentId, f64>,
    pub dones_after: BTreeMap<AgentId, bool>,
}

/// Values returned by `last()` for the selected agent.
#[derive(Clone, Debug, PartialEq)]
pub struct Last {
    pub agent: AgentId,
    pub observation: Option<Observation>,
    pub cumulative_reward: f64,
    pub done: bool,
    pub info: Info,
}

/// Action or observation space selector for [`super::space_of`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpaceKind {
    Action,
    Observation,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn agent_id_rejects_empty() {
        assert_eq!(AgentId::new(""), Err(EnvError::EmptyAgentId));
        assert!(AgentId::env().is_env());
        assert!(!AgentId::indexed("player", 0).is_env());
        let parsed: Result<AgentId, _> = serde_json::from_str("\"\"");
        assert!(parsed.is_err());
    }

    #[test]
    fn space_validation() {
        assert!(SpaceSpec::discrete(0).validate().is_err());
        assert!(SpaceSpec::discrete(1).validate().is_ok());
        assert!(SpaceSpec::Box { shape: vec![2, 0], low: 0.0, high: 1.0 }.validate().is_err());
        assert!(SpaceSpec::Box { shape: vec![2], low: 1.0, high: 0.0 }.validate().is_err());
    }

    #[test]
    fn box_containment_checks_shape_and_bounds() {
        let space = SpaceSpec::unit_box(vec![2, 2]);
        let mut obs = Observation::zeros(vec![2, 2]);
        assert!(space.contains(&obs));
        obs.set(&[1, 0], 2.0);
        assert!(!space.contains(&obs));
        assert!(!space.contains(&Observation::zeros(vec![4])));
        assert!(!space.contains(&Observation::Discrete(0)));
    }

    #[test]
    fn row_major_indexing() {
        let mut obs = Observation::zeros(vec![2, 3, 2]);
        obs.set(&[1, 2, 1], 1.0);
        assert_eq!(obs.data()[11], 1.0);
        assert_eq!(obs.at(&[1, 2, 1]), 1.0);
    }
}
