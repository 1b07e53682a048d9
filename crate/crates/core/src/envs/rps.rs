//! Repeated rock-paper-scissors. Both players act each round; the round
//! resolves on the step of the last player in the acting order.

use serde::{Deserialize, Serialize};

use crate::aec::{
    Action, AgentId, EnvError, EnvRng, Game, Info, Observation, Sequential, SpaceSpec, StepCtx,
};

pub const ROCK: Action = 0;
pub const PAPER: Action = 1;
pub const SCISSORS: Action = 2;
/// Observation before the opponent has played.
pub const NO_MOVE: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RpsConfig {
    pub num_rounds: usize,
    /// Acting order as seat indices; `[0, 1]` unless stated.
    pub order: Vec<usize>,
}

impl Default for RpsConfig {
    fn default() -> Self {
        Self { num_rounds: 5, order: vec![0, 1] }
    }
}

/// +1 if `a` beats `b`, -1 if it loses, 0 on a tie.
pub fn payoff(a: Action, b: Action) -> f64 {
    match (a + 3 - b) % 3 {
        0 => 0.0,
        1 => 1.0,
        _ => -1.0,
    }
}

#[derive(Clone, Debug)]
pub struct Rps {
    config: RpsConfig,
    players: [AgentId; 2],
    queued: [Option<Action>; 2],
    previous: [Option<Action>; 2],
    /// Position in `config.order` of the next actor.
    cursor: usize,
    round: usize,
}

pub type RpsEnv = Sequential<Rps>;

pub fn rps_new(num_rounds: usize) -> Result<RpsEnv, EnvError> {
    rps_with(RpsConfig { num_rounds, ..RpsConfig::default() })
}

pub fn rps_with(config: RpsConfig) -> Result<RpsEnv, EnvError> {
    if config.num_rounds == 0 {
        return Err(EnvError::InvalidConfig("num_rounds must be >= 1".into()));
    }
    let mut sorted = config.order.clone();
    sorted.sort_unstable();
    if sorted != [0, 1] {
        return Err(EnvError::InvalidConfig(format!("order {:?} is not a permutation of [0, 1]", config.order)));
    }
    Ok(Sequential::new(Rps {
        config,
        players: [AgentId::indexed("player", 0), AgentId::indexed("player", 1)],
        queued: [None; 2],
        previous: [None; 2],
        cursor: 0,
        round: 0,
    }))
}

impl Rps {
    fn seat(&self, agent: &AgentId) -> Option<usize> {
        self.players.iter().position(|p| p == agent)
    }

    pub fn config(&self) -> &RpsConfig {
        &self.config
    }
}

impl Game for Rps {
    fn name(&self) -> &str {
        "rps"
    }

    fn reset(&mut self, _seed: u64, _rng: &mut EnvRng) -> Vec<AgentId> {
        self.queued = [None; 2];
        self.previous = [None; 2];
        self.cursor = 0;
        self.round = 0;
        self.players.to_vec()
    }

    fn next_actor(&self) -> AgentId {
        self.players[self.config.order[self.cursor]].clone()
    }

    fn apply(
        &mut self,
        actor: &AgentId,
        action: Option<Action>,
        ctx: &mut StepCtx<'_>,
    ) -> Result<(), EnvError> {
        let seat = self.seat(actor).ok_or_else(|| EnvError::UnknownAgent(actor.clone()))?;
        self.queued[seat] = action;
        self.cursor += 1;
        if self.cursor == self.config.order.len() {
            let (a, b) = (self.queued[0].unwrap_or(ROCK), self.queued[1].unwrap_or(ROCK));
            ctx.emit(&self.players[0], payoff(a, b));
            ctx.emit(&self.players[1], payoff(b, a));
            self.previous = self.queued;
            self.queued = [None; 2];
            self.cursor = 0;
            self.round += 1;
            if self.round == self.config.num_rounds {
                ctx.end_episode();
            }
        }
        Ok(())
    }

    fn observe(&self, agent: &AgentId) -> Observation {
        let opponent = 1 - self.seat(agent).unwrap_or(0);
        Observation::Discrete(self.previous[opponent].unwrap_or(NO_MOVE))
    }

    fn action_space(&self, agent: &AgentId) -> Option<SpaceSpec> {
        self.seat(agent).map(|_| SpaceSpec::discrete(3))
    }

    fn observation_space(&self, agent: &AgentId) -> Option<SpaceSpec> {
        self.seat(agent).map(|_| SpaceSpec::discrete(4))
    }

    fn info(&self, _agent: &AgentId) -> Info {
        Info::from([("round".to_string(), serde_json::json!(self.round))])
    }

    fn possible_agents(&self) -> Option<Vec<AgentId>> {
        Some(self.players.to_vec())
    }

    fn cycle_regular(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aec::{AecEnv, GlobalState};

    fn p(i: usize) -> AgentId {
        AgentId::indexed("player", i)
    }

    #[test]
    fn payoff_table() {
        assert_eq!(payoff(ROCK, PAPER), -1.0);
        assert_eq!(payoff(PAPER, ROCK), 1.0);
        assert_eq!(payoff(SCISSORS, SCISSORS), 0.0);
        assert_eq!(payoff(SCISSORS, PAPER), 1.0);
        assert_eq!(payoff(ROCK, SCISSORS), 1.0);
    }

    #[test]
    fn resolution_is_deferred_to_the_second_player() {
        let mut env = rps_new(2).unwrap();
        env.reset(3);
        let s = env.status().unwrap();
        assert_eq!(s.cumulative_rewards.values().sum::<f64>(), 0.0);
        env.step(Some(ROCK)).unwrap();
        assert!(env.status().unwrap().rewards.values().all(|&r| r == 0.0));
        assert_eq!(env.agent_selection(), Some(p(1)));
        env.step(Some(PAPER)).unwrap();
        let s = env.status().unwrap();
        assert_eq!((s.rewards[&p(0)], s.rewards[&p(1)]), (-1.0, 1.0));
        let last = env.last(true).unwrap();
        assert_eq!(last.agent, p(0));
        assert_eq!(last.cumulative_reward, -1.0);
        assert!(!last.done);
        assert_eq!(last.observation, Some(Observation::Discrete(PAPER)));
        assert_eq!(env.state(), GlobalState::Unsupported);
    }

    #[test]
    fn episode_ends_after_last_round() {
        let mut env = rps_new(2).unwrap();
        env.reset(0);
        for a in [SCISSORS, SCISSORS, ROCK] {
            env.step(Some(a)).unwrap();
            assert!(env.status().unwrap().dones.values().all(|&d| !d));
        }
        env.step(Some(ROCK)).unwrap();
        assert!(env.status().unwrap().dones.values().all(|&d| d));
    }

    #[test]
    fn order_is_configurable() {
        let mut env = rps_with(RpsConfig { num_rounds: 1, order: vec![1, 0] }).unwrap();
        env.reset(0);
        assert_eq!(env.agent_selection(), Some(p(1)));
        assert!(rps_with(RpsConfig { num_rounds: 1, order: vec![0, 0] }).is_err());
        assert!(rps_new(0).is_err());
    }
}
