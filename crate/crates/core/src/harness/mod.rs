//! Rollouts, replay, race detection, reward attribution and the pruning experiment.
//!
//! Everything here is deterministic given its seed: the environment generator
//! is seeded by `reset(seed)` and policies draw from their own salted stream.

pub mod attribution;
pub mod digest;
pub mod policy;
pub mod pruning;
pub mod race;
pub mod replay;
pub mod rollout;
pub mod trajectory;

pub use attribution::{attribute_rewards, AttributionMatrix};
pub use policy::{build_driver, Driver, PolicySpec, Script};
pub use pruning::{near_capture_table, pruning_experiment, NearCaptureRow, PruningSummary};
pub use race::{race_detect, RaceOptions, RaceReport};
pub use replay::{replay_verify, ReplayOutcome};
pub use rollout::{episode_returns, rollout, RolloutOutcome, RolloutRequest};
pub use trajectory::{Header, Record, Trajectory, FORMAT};

use thiserror::Error;

use crate::aec::{AgentId, EnvError};

#[derive(Error, Debug)]
pub enum HarnessError {
    #[error(transparent)]
    Env(EnvError),
    #[error("unknown environment {0:?}")]
    UnknownEnv(String),
    #[error("policy does not fit the environment: {0}")]
    PolicySpaceMismatch(String),
    #[error("corrupt trajectory file: {0}")]
    CorruptFile(String),
    #[error("scenario does not fit the environment: {0}")]
    ScenarioMismatch(String),
    #[error("script has no action left for {0}")]
    ScriptExhausted(AgentId),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<EnvError> for HarnessError {
    fn from(e: EnvError) -> Self {
        match e {
            EnvError::UnknownEnvironment(name) => HarnessError::UnknownEnv(name),
            other => HarnessError::Env(other),
        }
    }
}
