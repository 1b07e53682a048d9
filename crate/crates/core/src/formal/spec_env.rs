//! An [`AecSpec`] run as a live sequential environment.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::aec::{
    Action, AgentId, EnvError, EnvRng, Game, GlobalState, Info, Observation, Sequential, SpaceSpec,
    StepCtx,
};

use super::policy::sample_index;
use super::validate::{compile_aec, CompiledAec};
use super::{AecSpec, FormalError};

/// Agents are `agent_1..agent_N` plus `"env"` for actor 0. Observations are
/// sampled from `O_i` whenever the state changes, so every step draws from the
/// env generator (agent steps too, when `O`, `R` or `ν` are stochastic).
#[derive(Clone, Debug)]
pub struct SpecGame {
    c: Arc<CompiledAec>,
    horizon: Option<u64>,
    ids: Vec<AgentId>,
    index: BTreeMap<AgentId, usize>,
    state: usize,
    next: usize,
    obs: Vec<usize>,
    steps: u64,
}

pub type SpecEnv = Sequential<SpecGame>;

impl SpecGame {
    pub fn new(spec: &AecSpec, horizon: Option<u64>) -> Result<Self, FormalError> {
        Ok(Self::from_compiled(Arc::new(compile_aec(spec)?), horizon))
    }

    pub fn from_compiled(c: Arc<CompiledAec>, horizon: Option<u64>) -> Self {
        let ids: Vec<AgentId> = (0..=c.n_agents)
            .map(|i| if i == 0 { AgentId::env() } else { AgentId::indexed("agent", i) })
            .collect();
        let index = ids.iter().cloned().enumerate().map(|(i, id)| (id, i)).collect();
        Self {
            state: c.initial,
            next: c.first_actor,
            obs: vec![0; c.n_agents + 1],
            steps: 0,
            c,
            horizon,
            ids,
            index,
        }
    }

    pub fn env(spec: &AecSpec, horizon: Option<u64>) -> Result<SpecEnv, FormalError> {
        Ok(Sequential::new(Self::new(spec, horizon)?))
    }

    pub fn compiled(&self) -> &CompiledAec {
        &self.c
    }

    pub fn state_index(&self) -> usize {
        self.state
    }

    pub fn actor_index(&self, agent: &AgentId) -> Option<usize> {
        self.index.get(agent).copied()
    }

    fn resample_observations(&mut self, rng: &mut EnvRng) {
        for i in 1..=self.c.n_agents {
            let row = &self.c.obs_fn[i][self.state];
            let weights: Vec<f64> = row.iter().map(|&(_, p)| p).collect();
            self.obs[i] = row[sample_index(&weights, rng)].0;
        }
    }
}

fn draw<T: Copy>(pairs: &[(T, f64)], rng: &mut EnvRng) -> T {
    let weights: Vec<f64> = pairs.iter().map(|&(_, p)| p).collect();
    pairs[sample_index(&weights, rng)].0
}

impl Game for SpecGame {
    fn name(&self) -> &str {
        "spec"
    }

    fn reset(&mut self, _seed: u64, rng: &mut EnvRng) -> Vec<AgentId> {
        self.state = self.c.initial;
        self.next = self.c.first_actor;
        self.steps = 0;
        self.resample_observations(rng);
        self.ids.clone()
    }

    fn next_actor(&self) -> AgentId {
        self.ids[self.next].clone()
    }

    fn apply(
        &mut self,
        actor: &AgentId,
        action: Option<Action>,
        ctx: &mut StepCtx<'_>,
    ) -> Result<(), EnvError> {
        let j = self.actor_index(actor).ok_or_else(|| EnvError::UnknownAgent(actor.clone()))?;
        let a = action.unwrap_or(0);
        let s = self.state;
        let s2 = draw(&self.c.successors(s, j, a), ctx.rng);
        for i in 1..=self.c.n_agents {
            let r = draw(self.c.reward_dist(i, s, j, a, s2), ctx.rng);
            ctx.emit(&self.ids[i], r);
        }
        self.next = draw(&self.c.nu[s][j][a], ctx.rng);
        self.state = s2;
        self.steps += 1;
        self.resample_observations(ctx.rng);
        if self.horizon.is_some_and(|h| self.steps >= h) {
            ctx.end_episode();
        }
        Ok(())
    }

    fn observe(&self, agent: &AgentId) -> Observation {
        Observation::Discrete(self.actor_index(agent).map_or(0, |i| self.obs[i]))
    }

    fn state(&self) -> GlobalState {
        GlobalState::Tensor(Observation::Discrete(self.state))
    }

    fn action_space(&self, agent: &AgentId) -> Option<SpaceSpec> {
        self.actor_index(agent).map(|i| SpaceSpec::discrete(self.c.actions[i]))
    }

    fn observation_space(&self, agent: &AgentId) -> Option<SpaceSpec> {
        self.actor_index(agent).map(|i| SpaceSpec::discrete(self.c.observations[i]))
    }

    fn info(&self, _agent: &AgentId) -> Info {
        Info::new()
    }

    fn possible_agents(&self) -> Option<Vec<AgentId>> {
        Some(self.ids.clone())
    }

    fn has_env_agent(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aec::AecEnv;
    use crate::formal::spec::*;

    /// ν cycles env → 1 → 2 → env.
    fn cycling() -> AecSpec {
        AecSpec {
            num_states: 1,
            initial_state: 0,
            num_agents: 2,
            first_actor: 0,
            actions: vec![2, 1],
            observations: vec![1, 1],
            agent_transitions: vec![
                AgentTransition { agent: 1, state: 0, action: 0, next: 0 },
                AgentTransition { agent: 1, state: 0, action: 1, next: 0 },
                AgentTransition { agent: 2, state: 0, action: 0, next: 0 },
            ],
            env_transitions: vec![EnvTransition { state: 0, next: 0, p: 1.0 }],
            reward_sets: None,
            rewards: vec![AecReward { agent: 2, state: 0, actor: 1, action: 1, next: 0, value: 3.0, p: 1.0 }],
            observation_fn: (1..=2).map(|agent| AecObservation { agent, state: 0, obs: 0, p: 1.0 }).collect(),
            next_agent: vec![
                NextAgent { state: 0, actor: 0, action: 0, next: 1, p: 1.0 },
                NextAgent { state: 0, actor: 1, action: 0, next: 2, p: 1.0 },
                NextAgent { state: 0, actor: 1, action: 1, next: 2, p: 1.0 },
                NextAgent { state: 0, actor: 2, action: 0, next: 0, p: 1.0 },
            ],
            derivation: None,
        }
    }

    #[test]
    fn acting_sequence_follows_nu() {
        let mut env = SpecGame::env(&cycling(), Some(6)).unwrap();
        env.reset(0);
        let mut order = Vec::new();
        for _ in 0..6 {
            let agent = env.agent_selection().unwrap();
            order.push(agent.to_string());
            let action = if agent.is_env() { None } else { Some(0) };
            env.step(action).unwrap();
        }
        assert_eq!(order, ["env", "agent_1", "agent_2", "env", "agent_1", "agent_2"]);
        assert!(env.status().unwrap().dones.values().all(|&d| d));
    }

    #[test]
    fn rewards_reach_any_agent() {
        let mut env = SpecGame::env(&cycling(), None).unwrap();
        env.reset(0);
        env.step(None).unwrap();
        env.step(Some(1)).unwrap();
        let a2 = AgentId::indexed("agent", 2);
        assert_eq!(env.status().unwrap().rewards[&a2], 3.0);
        assert_eq!(env.last(false).unwrap().cumulative_reward, 3.0);
    }
}
