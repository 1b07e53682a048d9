//! Seeded episodes recorded as trajectories.

use std::collections::BTreeMap;

use serde_json::Value;

use super::digest::digest;
use super::policy::{build_driver, PolicySpec};
use super::trajectory::{Header, Record, Trajectory, FORMAT};
use super::HarnessError;
use crate::aec::AgentId;
use crate::envs::{make, normalize_config};

#[derive(Clone, Debug, PartialEq)]
pub struct RolloutRequest {
    pub env: String,
    /// `Value::Null` selects the environment defaults.
    pub config: Value,
    pub policy: PolicySpec,
    pub seed: u64,
    pub max_steps: usize,
    /// Store whole observations next to their digests.
    pub full_obs: bool,
}

impl RolloutRequest {
    pub fn new(env: &str, policy: PolicySpec, seed: u64, max_steps: usize) -> Self {
        Self { env: env.to_string(), config: Value::Null, policy, seed, max_steps, full_obs: false }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RolloutOutcome {
    pub trajectory: Trajectory,
    pub returns: BTreeMap<AgentId, f64>,
    /// Whether every agent left before `max_steps` ran out.
    pub finished: bool,
}

/// Per-agent sum of emitted rewards, in record order.
pub fn episode_returns(trajectory: &Trajectory) -> BTreeMap<AgentId, f64> {
    let mut returns = BTreeMap::new();
    for r in &trajectory.records {
        for (agent, reward) in &r.rewards_emitted {
            *returns.entry(agent.clone()).or_insert(0.0) += reward;
        }
    }
    returns
}

pub fn rollout(req: &RolloutRequest) -> Result<RolloutOutcome, HarnessError> {
    let config = normalize_config(&req.env, &req.config)?;
    let mut env = make(&req.env, &config)?;
    env.reset(req.seed);
    let mut driver = build_driver(&req.policy, &env, req.seed)?;
    let mut records = Vec::new();
    for t in 0..req.max_steps as u64 {
        let status = env.status()?;
        let Some(agent) = status.agent_selection.clone() else { break };
        let obs = env.observe(&agent)?;
        let action = if status.is_done(&agent) || agent.is_env() { None } else { Some(driver.act(&env, &agent)?) };
        env.step(action)?;
        let after = env.status()?;
        records.push(Record {
            t,
            agent,
            action,
            rewards_emitted: after.rewards.clone(),
            dones_after: after.dones.clone(),
            obs_digest: digest(&obs),
            obs: req.full_obs.then_some(obs),
        });
    }
    let finished = env.agents().is_empty();
    let trajectory = Trajectory {
        header: Header {
            format: FORMAT.to_string(),
            env: req.env.clone(),
            config_digest: digest(&config),
            seed: req.seed,
            config,
            full_obs: req.full_obs,
        },
        records,
    };
    let returns = episode_returns(&trajectory);
    Ok(RolloutOutcome { trajectory, returns, finished })
}
