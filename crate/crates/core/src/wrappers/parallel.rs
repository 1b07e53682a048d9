//! Simultaneous-move view of a cycle-regular sequential environment, and back.
//!
//! [`to_parallel`] runs one whole cycle per call: each live agent's action in
//! the environment's own order, then the `env` step, then the null steps of
//! agents that became done. Observations are taken after the cycle resolves.
//! An agent done mid-cycle takes no further part from the next cycle on.
//!
//! [`from_parallel`] buffers actions one agent at a time and runs the parallel
//! step once the last live agent has acted. Rewards that the source emitted at
//! the `env` step are emitted at the facade's `env` step, everything else at
//! the last agent's step, so environments that only pay at the `env` step or
//! at the last agent's step round-trip to identical transitions.

use std::collections::{BTreeMap, BTreeSet};

use crate::aec::{
    Action, AecEnv, AgentId, EnvError, EnvRng, Game, GlobalState, Info, Observation, Sequential,
    SpaceSpec, StepCtx,
};

/// Result of one parallel step. Every map is keyed by the agents live at cycle start.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParallelStep {
    pub observations: BTreeMap<AgentId, Observation>,
    /// Sum of the rewards emitted to each agent over the cycle.
    pub rewards: BTreeMap<AgentId, f64>,
    /// The part of `rewards` emitted by the `env` step.
    pub env_rewards: BTreeMap<AgentId, f64>,
    pub dones: BTreeMap<AgentId, bool>,
    pub infos: BTreeMap<AgentId, Info>,
}

pub trait ParallelEnv: Send {
    fn name(&self) -> &str;

    fn reset(&mut self, seed: u64) -> BTreeMap<AgentId, Observation>;

    /// Live learning agents in acting order; excludes `"env"`.
    fn agents(&self) -> Vec<AgentId>;

    /// Requires an action for exactly the agents in [`ParallelEnv::agents`].
    fn step(&mut self, actions: &BTreeMap<AgentId, Action>) -> Result<ParallelStep, EnvError>;

    fn action_space(&self, agent: &AgentId) -> Result<SpaceSpec, EnvError>;

    fn observation_space(&self, agent: &AgentId) -> Result<SpaceSpec, EnvError>;

    fn infos(&self) -> BTreeMap<AgentId, Info>;

    fn state(&self) -> GlobalState {
        GlobalState::Unsupported
    }

    fn possible_agents(&self) -> Option<Vec<AgentId>> {
        None
    }

    /// Whether the underlying cycle ends with an `env` step.
    fn has_env_agent(&self) -> bool {
        false
    }
}

/// Parallel wrapper produced by [`to_parallel`].
pub struct ToParallel<E> {
    env: E,
}

/// Fails with [`EnvError::NotCycleRegular`] unless `env` declares cycle-regularity.
pub fn to_parallel<E: AecEnv>(env: E) -> Result<ToParallel<E>, EnvError> {
    if !env.cycle_regular() {
        return Err(EnvError::NotCycleRegular(env.name().to_string()));
    }
    Ok(ToParallel { env })
}

impl<E: AecEnv> ToParallel<E> {
    pub fn inner(&self) -> &E {
        &self.env
    }

    pub fn into_inner(self) -> E {
        self.env
    }

    fn observations(&self) -> BTreeMap<AgentId, Observation> {
        self.agents()
            .into_iter()
            .filter_map(|a| self.env.observe(&a).ok().map(|o| (a, o)))
            .collect()
    }

    fn add_rewards(&self, into: &mut BTreeMap<AgentId, f64>) -> Result<(), EnvError> {
        for (agent, slot) in into.iter_mut() {
            if let Some(r) = self.env.status()?.rewards.get(agent) {
                *slot += r;
            }
        }
        Ok(())
    }

    /// Steps selected done agents with the null action until a live agent is selected.
    fn flush_done(&mut self, keys: &[AgentId], out: &mut ParallelStep) -> Result<(), EnvError> {
        while let Some(sel) = self.env.agent_selection() {
            if !self.env.status()?.is_done(&sel) {
                break;
            }
            if keys.contains(&sel) {
                out.observations.insert(sel.clone(), self.env.observe(&sel)?);
                out.infos.insert(sel.clone(), self.env.status()?.infos.get(&sel).cloned().unwrap_or_default());
                out.dones.insert(sel.clone(), true);
            }
            self.env.step(None)?;
        }
        Ok(())
    }
}

impl<E: AecEnv> ParallelEnv for ToParallel<E> {
    fn name(&self) -> &str {
        self.env.name()
    }

    fn reset(&mut self, seed: u64) -> BTreeMap<AgentId, Observation> {
        self.env.reset(seed);
        self.observations()
    }

    fn agents(&self) -> Vec<AgentId> {
        self.env.agents().iter().filter(|a| !a.is_env()).cloned().collect()
    }

    fn step(&mut self, actions: &BTreeMap<AgentId, Action>) -> Result<ParallelStep, EnvError> {
        let keys = self.agents();
        if keys.is_empty() {
            return Err(EnvError::EpisodeOver);
        }
        if let Some(missing) = keys.iter().find(|a| !actions.contains_key(*a)) {
            return Err(EnvError::MissingAction(missing.clone()));
        }
        if let Some(extra) = actions.keys().find(|a| !keys.contains(*a)) {
            return Err(EnvError::UnknownAgent(extra.clone()));
        }
        for (agent, &a) in actions {
            if !self.env.action_space(agent)?.contains_action(a) {
                return Err(EnvError::OutOfSpaceAction { agent: agent.clone(), action: a });
            }
        }
        let zero: BTreeMap<AgentId, f64> = keys.iter().map(|a| (a.clone(), 0.0)).collect();
        let mut agent_rewards = zero.clone();
        let mut out = ParallelStep { env_rewards: zero, ..Default::default() };
        let mut acted = BTreeSet::new();
        loop {
            self.flush_done(&keys, &mut out)?;
            let Some(sel) = self.env.agent_selection() else { break };
            if sel.is_env() {
                self.env.step(None)?;
                let mut env_part = std::mem::take(&mut out.env_rewards);
                self.add_rewards(&mut env_part)?;
                out.env_rewards = env_part;
                break;
            }
            if !acted.insert(sel.clone()) {
                break;
            }
            self.env.step(Some(actions[&sel]))?;
            self.add_rewards(&mut agent_rewards)?;
        }
        // Capture the post-cycle view before done agents leave.
        let status = self.env.status()?;
        for agent in keys.iter().filter(|a| status.contains(a)) {
            out.observations.insert(agent.clone(), self.env.observe(agent)?);
            out.infos.insert(agent.clone(), status.infos.get(agent).cloned().unwrap_or_default());
            out.dones.insert(agent.clone(), status.is_done(agent));
        }
        self.flush_done(&keys, &mut out)?;
        out.rewards = agent_rewards
            .iter()
            .map(|(a, r)| (a.clone(), r + out.env_rewards[a]))
            .collect();
        Ok(out)
    }

    fn action_space(&self, agent: &AgentId) -> Result<SpaceSpec, EnvError> {
        self.env.action_space(agent)
    }

    fn observation_space(&self, agent: &AgentId) -> Result<SpaceSpec, EnvError> {
        self.env.observation_space(agent)
    }

    fn infos(&self) -> BTreeMap<AgentId, Info> {
        let Ok(status) = self.env.status() else { return BTreeMap::new() };
        self.agents()
            .into_iter()
            .map(|a| {
                let info = status.infos.get(&a).cloned().unwrap_or_default();
                (a, info)
            })
            .collect()
    }

    fn state(&self) -> GlobalState {
        self.env.state()
    }

    fn possible_agents(&self) -> Option<Vec<AgentId>> {
        self.env.possible_agents()
    }

    fn has_env_agent(&self) -> bool {
        self.env.has_env_agent()
    }
}

/// Sequential facade over a parallel environment; see the module docs.
pub struct FromParallel<P> {
    penv: P,
    env_id: AgentId,
    /// Agents taking part in the current cycle, in acting order.
    cycle: Vec<AgentId>,
    cursor: usize,
    queued: BTreeMap<AgentId, Action>,
    /// Rewards and dones of a resolved cycle, released at the `env` step.
    pending: Option<ParallelStep>,
    observations: BTreeMap<AgentId, Observation>,
    infos: BTreeMap<AgentId, Info>,
}

pub type FromParallelEnv<P> = Sequential<FromParallel<P>>;

pub fn from_parallel<P: ParallelEnv>(penv: P) -> FromParallelEnv<P> {
    Sequential::new(FromParallel {
        penv,
        env_id: AgentId::env(),
        cycle: Vec::new(),
        cursor: 0,
        queued: BTreeMap::new(),
        pending: None,
        observations: BTreeMap::new(),
        infos: BTreeMap::new(),
    })
}

impl<P: ParallelEnv> FromParallel<P> {
    pub fn parallel(&self) -> &P {
        &self.penv
    }

    fn release(&mut self, result: ParallelStep, ctx: &mut StepCtx<'_>) {
        for (agent, r) in &result.env_rewards {
            ctx.emit(agent, *r);
        }
        for (agent, &done) in &result.dones {
            if done {
                ctx.mark_done(agent);
            }
        }
        let next = self.penv.agents();
        self.cursor = 0;
        if next.is_empty() {
            // Keep the finished cycle so the closing null steps start from its head.
            ctx.end_episode();
        } else {
            self.cycle = next;
        }
    }
}

impl<P: ParallelEnv> Game for FromParallel<P> {
    fn name(&self) -> &str {
        self.penv.name()
    }

    fn reset(&mut self, seed: u64, _rng: &mut EnvRng) -> Vec<AgentId> {
        self.observations = self.penv.reset(seed);
        self.infos = self.penv.infos();
        self.cycle = self.penv.agents();
        self.cursor = 0;
        self.queued.clear();
        self.pending = None;
        let mut agents = self.cycle.clone();
        if self.penv.has_env_agent() {
            agents.push(self.env_id.clone());
        }
        agents
    }

    fn next_actor(&self) -> AgentId {
        match self.cycle.get(self.cursor) {
            Some(a) => a.clone(),
            None if self.penv.has_env_agent() => self.env_id.clone(),
            None => self.cycle.first().cloned().unwrap_or_else(|| self.env_id.clone()),
        }
    }

    fn apply(
        &mut self,
        actor: &AgentId,
        action: Option<Action>,
        ctx: &mut StepCtx<'_>,
    ) -> Result<(), EnvError> {
        if actor.is_env() {
            if let Some(result) = self.pending.take() {
                self.release(result, ctx);
            }
            return Ok(());
        }
        let action = action.ok_or_else(|| EnvError::NullActionForLiveAgent(actor.clone()))?;
        if self.cycle.get(self.cursor) != Some(actor) {
            return Err(EnvError::UnknownAgent(actor.clone()));
        }
        let mut queued = self.queued.clone();
        queued.insert(actor.clone(), action);
        if self.cursor + 1 < self.cycle.len() {
            self.queued = queued;
            self.cursor += 1;
            return Ok(());
        }
        let result = self.penv.step(&queued)?;
        self.queued.clear();
        self.cursor += 1;
        for (agent, r) in &result.rewards {
            ctx.emit(agent, r - result.env_rewards[agent]);
        }
        self.observations.extend(result.observations.clone());
        self.infos = result.infos.clone();
        if self.penv.has_env_agent() {
            self.pending = Some(result);
        } else {
            let result = ParallelStep { env_rewards: BTreeMap::new(), ..result };
            self.release(result, ctx);
        }
        Ok(())
    }

    fn observe(&self, agent: &AgentId) -> Observation {
        self.observations.get(agent).cloned().unwrap_or(Observation::Discrete(0))
    }

    fn state(&self) -> GlobalState {
        self.penv.state()
    }

    fn action_space(&self, agent: &AgentId) -> Option<SpaceSpec> {
        if agent.is_env() {
            return self.penv.has_env_agent().then(|| SpaceSpec::discrete(1));
        }
        self.penv.action_space(agent).ok()
    }

    fn observation_space(&self, agent: &AgentId) -> Option<SpaceSpec> {
        if agent.is_env() {
            return self.penv.has_env_agent().then(|| SpaceSpec::discrete(1));
        }
        self.penv.observation_space(agent).ok()
    }

    fn info(&self, agent: &AgentId) -> Info {
        self.infos.get(agent).cloned().unwrap_or_default()
    }

    fn possible_agents(&self) -> Option<Vec<AgentId>> {
        self.penv.possible_agents()
    }

    fn cycle_regular(&self) -> bool {
        true
    }

    fn has_env_agent(&self) -> bool {
        self.penv.has_env_agent()
    }
}
