//! The sequential (agent environment cycle) environment interface.
//!
//! One agent acts at a time. After each `step` the environment emits rewards
//! to any agent, updates done flags, and picks the next actor. Learning code
//! reads the selected agent's view through [`AecEnv::last`], which reports the
//! reward accumulated since that agent last acted.
//!
//! Done protocol: an agent flagged done stays in `agents` until it is stepped
//! once with a null action, at which point it is removed.

mod sequential;
mod types;

pub use sequential::{EnvRng, Game, Sequential, StepCtx};
pub use types::{
    Action, AgentId, EnvStatus, GlobalState, Info, Last, Observation, SpaceKind, SpaceSpec,
    Transition, ENV_AGENT,
};

use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum EnvError {
    #[error("agent id must be nonempty")]
    EmptyAgentId,
    #[error("environment used before reset")]
    CalledBeforeReset,
    #[error("episode is over: no live agents")]
    EpisodeOver,
    #[error("action {action} is outside the action space of {agent}")]
    OutOfSpaceAction { agent: AgentId, action: Action },
    #[error("null action passed for live agent {0}")]
    NullActionForLiveAgent(AgentId),
    #[error("non-null action passed for done agent {0}")]
    NonNullActionForDoneAgent(AgentId),
    #[error("the environment agent only accepts the null action")]
    NonNullActionForEnvAgent,
    #[error("unknown agent {0}")]
    UnknownAgent(AgentId),
    #[error("illegal move {action} by {agent}: {reason}")]
    IllegalMove { agent: AgentId, action: Action, reason: String },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("parallel step is missing an action for {0}")]
    MissingAction(AgentId),
    #[error("unknown environment {0:?}")]
    UnknownEnvironment(String),
    #[error("environment {0} is not cycle-regular")]
    NotCycleRegular(String),
}

/// The sequential environment contract every bundled environment and wrapper satisfies.
///
/// Instances are single-threaded; they may be moved between threads.
pub trait AecEnv: Send {
    fn name(&self) -> &str;

    /// Resets to a starting configuration. Identical seeds give identical episodes
    /// under identical action sequences.
    fn reset(&mut self, seed: u64);

    /// Applies the selected agent's action; `None` is required for done agents
    /// and the environment agent, and rejected otherwise. A rejected call leaves
    /// the environment unchanged.
    fn step(&mut self, action: Option<Action>) -> Result<(), EnvError>;

    fn observe(&self, agent: &AgentId) -> Result<Observation, EnvError>;

    fn state(&self) -> GlobalState {
        GlobalState::Unsupported
    }

    fn action_space(&self, agent: &AgentId) -> Result<SpaceSpec, EnvError>;

    fn observation_space(&self, agent: &AgentId) -> Result<SpaceSpec, EnvError>;

    fn status(&self) -> Result<&EnvStatus, EnvError>;

    fn possible_agents(&self) -> Option<Vec<AgentId>> {
        None
    }

    /// Every live agent acts exactly once per cycle before any environment resolution.
    fn cycle_regular(&self) -> bool {
        false
    }

    /// Whether `"env"` appears in `agents` and takes explicit steps.
    fn has_env_agent(&self) -> bool {
        false
    }

    /// Observation rebuilt from the authoritative current state, bypassing any
    /// caching. Used by the compliance checker's staleness probe.
    fn recompute_observation(&self, _agent: &AgentId) -> Option<Observation> {
        None
    }

    fn agents(&self) -> &[AgentId] {
        match self.status() {
            Ok(s) => &s.agents,
            Err(_) => &[],
        }
    }

    fn agent_selection(&self) -> Option<AgentId> {
        self.status().ok().and_then(|s| s.agent_selection.clone())
    }

    /// Observation (optional), accumulated reward, done flag and info of the selected agent.
    fn last(&self, observe: bool) -> Result<Last, EnvError> {
        let status = self.status()?;
        let agent = status.agent_selection.clone().ok_or(EnvError::EpisodeOver)?;
        let observation = if observe { Some(self.observe(&agent)?) } else { None };
        Ok(Last {
            cumulative_reward: status.cumulative_rewards.get(&agent).copied().unwrap_or(0.0),
            done: status.is_done(&agent),
            info: status.infos.get(&agent).cloned().unwrap_or_default(),
            observation,
            agent,
        })
    }
}

impl<E: AecEnv + ?Sized> AecEnv for Box<E> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn reset(&mut self, seed: u64) {
        (**self).reset(seed)
    }
    fn step(&mut self, action: Option<Action>) -> Result<(), EnvError> {
        (**self).step(action)
    }
    fn observe(&self, agent: &AgentId) -> Result<Observation, EnvError> {
        (**self).observe(agent)
    }
    fn state(&self) -> GlobalState {
        (**self).state()
    }
    fn action_space(&self, agent: &AgentId) -> Result<SpaceSpec, EnvError> {
        (**self).action_space(agent)
    }
    fn observation_space(&self, agent: &AgentId) -> Result<SpaceSpec, EnvError> {
        (**self).observation_space(agent)
    }
    fn status(&self) -> Result<&EnvStatus, EnvError> {
        (**self).status()
    }
    fn possible_agents(&self) -> Option<Vec<AgentId>> {
        (**self).possible_agents()
    }
    fn cycle_regular(&self) -> bool {
        (**self).cycle_regular()
    }
    fn has_env_agent(&self) -> bool {
        (**self).has_env_agent()
    }
    fn recompute_observation(&self, agent: &AgentId) -> Option<Observation> {
        (**self).recompute_observation(agent)
    }
}

/// Space lookup by kind.
pub fn space_of(env: &dyn AecEnv, agent: &AgentId, kind: SpaceKind) -> Result<SpaceSpec, EnvError> {
    match kind {
        SpaceKind::Action => env.action_space(agent),
        SpaceKind::Observation => env.observation_space(agent),
    }
}

/// Actions of `agent`'s discrete space, narrowed by an `"action_mask"` info entry when present.
pub fn legal_actions(env: &dyn AecEnv, agent: &AgentId) -> Result<Vec<Action>, EnvError> {
    let n = env.action_space(agent)?.n().unwrap_or(0);
    let mask = env.status()?.infos.get(agent).and_then(|i| i.get("action_mask")).and_then(|m| m.as_array());
    Ok(match mask {
        Some(m) => (0..n).filter(|&a| m.get(a).and_then(|v| v.as_u64()) == Some(1)).collect(),
        None => (0..n).collect(),
    })
}

/// Yields the selected agent before each step, for at most `max_steps` yields.
///
/// The caller steps the environment between calls to [`AgentIter::next`]:
///
/// ```
/// use agentcycle::aec::{AecEnv, AgentIter};
/// use agentcycle::envs::tictactoe_new;
///
/// let mut env = tictactoe_new();
/// env.reset(0);
/// let mut iter = AgentIter::new(4);
/// let mut cell = 0;
/// while let Some(_agent) = iter.next(&env) {
///     env.step(Some(cell)).unwrap();
///     cell += 1;
/// }
/// ```
#[derive(Clone, Debug)]
pub struct AgentIter {
    remaining: usize,
}

impl AgentIter {
    pub fn new(max_steps: usize) -> Self {
        Self { remaining: max_steps }
    }

    pub fn next(&mut self, env: &dyn AecEnv) -> Option<AgentId> {
        if self.remaining == 0 {
            return None;
        }
        let status = env.status().ok()?;
        if status.agents.is_empty() {
            return None;
        }
        self.remaining -= 1;
        status.agent_selection.clone()
    }
}
