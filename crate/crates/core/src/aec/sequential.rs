use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    Action, AecEnv, AgentId, EnvError, EnvStatus, GlobalState, Info, Observation, SpaceSpec,
};

/// The project-wide environment generator. Seeded once per `reset`.
pub type EnvRng = ChaCha8Rng;

/// Mutable context handed to [`Game::apply`]: reward emission, done flags and the env RNG.
pub struct StepCtx<'a> {
    pub rng: &'a mut EnvRng,
    emitted: BTreeMap<AgentId, f64>,
    newly_done: Vec<AgentId>,
    episode_over: bool,
}

impl<'a> StepCtx<'a> {
    pub fn new(rng: &'a mut EnvRng) -> Self {
        Self { rng, emitted: BTreeMap::new(), newly_done: Vec::new(), episode_over: false }
    }

    /// Adds `reward` to `agent`'s instantaneous reward for this step.
    pub fn emit(&mut self, agent: &AgentId, reward: f64) {
        *self.emitted.entry(agent.clone()).or_insert(0.0) += reward;
    }

    pub fn mark_done(&mut self, agent: &AgentId) {
        self.newly_done.push(agent.clone());
    }

    /// Flags every live agent done.
    pub fn end_episode(&mut self) {
        self.episode_over = true;
    }

    pub fn emitted(&self) -> &BTreeMap<AgentId, f64> {
        &self.emitted
    }
}

/// Game rules without the protocol bookkeeping. [`Sequential`] turns a `Game`
/// into an [`AecEnv`] by handling validation, reward accumulation, the done
/// protocol and agent selection.
///
/// `apply` must leave the game untouched when it returns an error.
pub trait Game: Send {
    fn name(&self) -> &str;

    /// Starts a new episode and returns the initial live agents in order.
    fn reset(&mut self, seed: u64, rng: &mut EnvRng) -> Vec<AgentId>;

    /// The actor chosen by the turn rule after the most recent reset or apply.
    fn next_actor(&self) -> AgentId;

    fn apply(
        &mut self,
        actor: &AgentId,
        action: Option<Action>,
        ctx: &mut StepCtx<'_>,
    ) -> Result<(), EnvError>;

    fn observe(&self, agent: &AgentId) -> Observation;

    fn recompute_observation(&self, agent: &AgentId) -> Option<Observation> {
        Some(self.observe(agent))
    }

    fn state(&self) -> GlobalState {
        GlobalState::Unsupported
    }

    fn action_space(&self, agent: &AgentId) -> Option<SpaceSpec>;

    fn observation_space(&self, agent: &AgentId) -> Option<SpaceSpec>;

    fn info(&self, _agent: &AgentId) -> Info {
        Info::new()
    }

    fn possible_agents(&self) -> Option<Vec<AgentId>> {
        None
    }

    fn cycle_regular(&self) -> bool {
        false
    }

    fn has_env_agent(&self) -> bool {
        false
    }

    /// Called after a done agent has taken its null step and left `agents`.
    fn on_removed(&mut self, _agent: &AgentId) {}
}

/// Protocol driver implementing [`AecEnv`] for any [`Game`].
pub struct Sequential<G> {
    game: G,
    rng: EnvRng,
    status: Option<EnvStatus>,
}

impl<G: Game> Sequential<G> {
    pub fn new(game: G) -> Self {
        Self { game, rng: EnvRng::seed_from_u64(0), status: None }
    }

    pub fn game(&self) -> &G {
        &self.game
    }

    /// Direct access to the rules, for constructing scenarios after `reset`.
    /// Callers are responsible for keeping the game consistent with `status`.
    pub fn game_mut(&mut self) -> &mut G {
        &mut self.game
    }

    /// Replaces the env generator, e.g. to resample one environment step from a fixed state.
    pub fn reseed_rng(&mut self, seed: u64) {
        self.rng = EnvRng::seed_from_u64(seed);
    }

    /// Recomputes infos and agent selection after out-of-band changes made via [`Self::game_mut`].
    pub fn refresh(&mut self) {
        if let Some(status) = self.status.as_mut() {
            refresh_infos(&self.game, status);
            select_next(&self.game, status);
        }
    }
}

impl<G: Game + Clone> Clone for Sequential<G> {
    fn clone(&self) -> Self {
        Self { game: self.game.clone(), rng: self.rng.clone(), status: self.status.clone() }
    }
}

fn refresh_infos<G: Game>(game: &G, status: &mut EnvStatus) {
    status.infos = status.agents.iter().map(|a| (a.clone(), game.info(a))).collect();
}

fn select_next<G: Game>(game: &G, status: &mut EnvStatus) {
    if status.agents.is_empty() {
        status.agent_selection = None;
        return;
    }
    let candidate = game.next_actor();
    let first_done = status.agents.iter().find(|a| status.is_done(a)).cloned();
    status.agent_selection = match first_done {
        Some(first) => {
            if status.contains(&candidate) && status.is_done(&candidate) {
                Some(candidate)
            } else {
                Some(first)
            }
        }
        None if status.contains(&candidate) => Some(candidate),
        None => Some(status.agents[0].clone()),
    };
}

impl<G: Game> AecEnv for Sequential<G> {
    fn name(&self) -> &str {
        self.game.name()
    }

    fn reset(&mut self, seed: u64) {
        self.rng = EnvRng::seed_from_u64(seed);
        let agents = self.game.reset(seed, &mut self.rng);
        debug_assert!(
            self.game.has_env_agent() || agents.iter().all(|a| !a.is_env()),
            "\"env\" is reserved for environments with an environment agent"
        );
        let zero = |agents: &[AgentId]| agents.iter().map(|a| (a.clone(), 0.0)).collect();
        let mut status = EnvStatus {
            possible_agents: self.game.possible_agents(),
            agent_selection: None,
            rewards: zero(&agents),
            cumulative_rewards: zero(&agents),
            dones: agents.iter().map(|a| (a.clone(), false)).collect(),
            infos: BTreeMap::new(),
            agents,
        };
        refresh_infos(&self.game, &mut status);
        select_next(&self.game, &mut status);
        self.status = Some(status);
    }

    fn step(&mut self, action: Option<Action>) -> Result<(), EnvError> {
        let Self { game, rng, status } = self;
        let status = status.as_mut().ok_or(EnvError::CalledBeforeReset)?;
        let actor = status.agent_selection.clone().ok_or(EnvError::EpisodeOver)?;

        if status.is_done(&actor) {
            if action.is_some() {
                return Err(EnvError::NonNullActionForDoneAgent(actor));
            }
            status.agents.retain(|a| a != &actor);
            status.rewards.remove(&actor);
            status.cumulative_rewards.remove(&actor);
            status.dones.remove(&actor);
            status.rewards.values_mut().for_each(|r| *r = 0.0);
            game.on_removed(&actor);
            refresh_infos(game, status);
            select_next(game, status);
            return Ok(());
        }

        if actor.is_env() {
            if action.is_some() {
                return Err(EnvError::NonNullActionForEnvAgent);
            }
        } else {
            let a = action.ok_or_else(|| EnvError::NullActionForLiveAgent(actor.clone()))?;
            let space = game
                .action_space(&actor)
                .ok_or_else(|| EnvError::UnknownAgent(actor.clone()))?;
            if !space.contains_action(a) {
                return Err(EnvError::OutOfSpaceAction { agent: actor, action: a });
            }
        }

        let mut ctx = StepCtx::new(rng);
        game.apply(&actor, action, &mut ctx)?;
        let StepCtx { emitted, newly_done, episode_over, .. } = ctx;

        status.rewards.values_mut().for_each(|r| *r = 0.0);
        status.cumulative_rewards.insert(actor.clone(), 0.0);
        // Emissions to agents no longer in `agents` are dropped.
        for (agent, reward) in emitted {
            if let Some(slot) = status.rewards.get_mut(&agent) {
                *slot += reward;
            }
        }
        for (agent, reward) in &status.rewards {
            *status.cumulative_rewards.entry(agent.clone()).or_insert(0.0) += reward;
        }
        if episode_over {
            status.dones.values_mut().for_each(|d| *d = true);
        }
        for agent in newly_done {
            if let Some(d) = status.dones.get_mut(&agent) {
                *d = true;
            }
        }
        refresh_infos(game, status);
        select_next(game, status);
        Ok(())
    }

    fn observe(&self, agent: &AgentId) -> Result<Observation, EnvError> {
        let status = self.status()?;
        if !status.contains(agent) {
            return Err(EnvError::UnknownAgent(agent.clone()));
        }
        Ok(self.game.observe(agent))
    }

    fn state(&self) -> GlobalState {
        if self.status.is_none() {
            return GlobalState::Unsupported;
        }
        self.game.state()
    }

    fn action_space(&self, agent: &AgentId) -> Result<SpaceSpec, EnvError> {
        self.game.action_space(agent).ok_or_else(|| EnvError::UnknownAgent(agent.clone()))
    }

    fn observation_space(&self, agent: &AgentId) -> Result<SpaceSpec, EnvError> {
        self.game.observation_space(agent).ok_or_else(|| EnvError::UnknownAgent(agent.clone()))
    }

    fn status(&self) -> Result<&EnvStatus, EnvError> {
        self.status.as_ref().ok_or(EnvError::CalledBeforeReset)
    }

    fn possible_agents(&self) -> Option<Vec<AgentId>> {
        self.game.possible_agents()
    }

    fn cycle_regular(&self) -> bool {
        self.game.cycle_regular()
    }

    fn has_env_agent(&self) -> bool {
        self.game.has_env_agent()
    }

    fn recompute_observation(&self, agent: &AgentId) -> Option<Observation> {
        let status = self.status.as_ref()?;
        if !status.contains(agent) {
            return None;
        }
        self.game.recompute_observation(agent)
    }
}
