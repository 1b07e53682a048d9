//! A ring of seats with Uno-style turn effects: `pass` hands the turn on,
//! `reverse` flips the direction, `skip` jumps over the next seat. Every
//! action pays its actor +1.

use crate::aec::{
    Action, AgentId, EnvError, EnvRng, Game, Info, Observation, Sequential, SpaceSpec, StepCtx,
};

pub const PASS: Action = 0;
pub const REVERSE: Action = 1;
pub const SKIP: Action = 2;

#[derive(Clone, Debug)]
pub struct ReverseGame {
    seats: Vec<AgentId>,
    max_cycles: usize,
    current: usize,
    /// `true` while turns move to increasing seat indices.
    forward: bool,
    turns: usize,
}

pub type ReverseEnv = Sequential<ReverseGame>;

/// One cycle is `n_agents` turns; the episode ends after `max_cycles` cycles.
pub fn reverse_game_new(n_agents: usize, max_cycles: usize) -> Result<ReverseEnv, EnvError> {
    if n_agents < 3 {
        return Err(EnvError::InvalidConfig("reverse_game needs at least 3 agents".into()));
    }
    if max_cycles == 0 {
        return Err(EnvError::InvalidConfig("max_cycles must be >= 1".into()));
    }
    Ok(Sequential::new(ReverseGame {
        seats: (0..n_agents).map(|i| AgentId::indexed("seat", i)).collect(),
        max_cycles,
        current: 0,
        forward: true,
        turns: 0,
    }))
}

impl ReverseGame {
    fn seat(&self, agent: &AgentId) -> Option<usize> {
        self.seats.iter().position(|s| s == agent)
    }

    fn advance(&self, from: usize, hops: usize) -> usize {
        let n = self.seats.len();
        if self.forward {
            (from + hops) % n
        } else {
            (from + n * hops - hops) % n
        }
    }
}

impl Game for ReverseGame {
    fn name(&self) -> &str {
        "reverse_game"
    }

    fn reset(&mut self, _seed: u64, _rng: &mut EnvRng) -> Vec<AgentId> {
        self.current = 0;
        self.forward = true;
        self.turns = 0;
        self.seats.clone()
    }

    fn next_actor(&self) -> AgentId {
        self.seats[self.current].clone()
    }

    fn apply(
        &mut self,
        actor: &AgentId,
        action: Option<Action>,
        ctx: &mut StepCtx<'_>,
    ) -> Result<(), EnvError> {
        let seat = self.seat(actor).ok_or_else(|| EnvError::UnknownAgent(actor.clone()))?;
        let action = action.ok_or_else(|| EnvError::NullActionForLiveAgent(actor.clone()))?;
        ctx.emit(actor, 1.0);
        let hops = match action {
            REVERSE => {
                self.forward = !self.forward;
                1
            }
            SKIP => 2,
            _ => 1,
        };
        self.current = self.advance(seat, hops);
        self.turns += 1;
        if self.turns == self.seats.len() * self.max_cycles {
            ctx.end_episode();
        }
        Ok(())
    }

    fn observe(&self, _agent: &AgentId) -> Observation {
        Observation::Discrete(usize::from(!self.forward))
    }

    fn action_space(&self, agent: &AgentId) -> Option<SpaceSpec> {
        self.seat(agent).map(|_| SpaceSpec::discrete(3))
    }

    fn observation_space(&self, agent: &AgentId) -> Option<SpaceSpec> {
        self.seat(agent).map(|_| SpaceSpec::discrete(2))
    }

    fn info(&self, _agent: &AgentId) -> Info {
        Info::from([("forward".to_string(), serde_json::json!(self.forward))])
    }

    fn possible_agents(&self) -> Option<Vec<AgentId>> {
        Some(self.seats.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aec::{AecEnv, AgentIter};

    fn seat(i: usize) -> AgentId {
        AgentId::indexed("seat", i)
    }

    /// Oracle: the ring rule as a table over (seat, direction, action).
    fn expected_next(seat: usize, forward: bool, action: Action, n: usize) -> (usize, bool) {
        let dir: i64 = if forward { 1 } else { -1 };
        let (dir, hops) = match action {
            REVERSE => (-dir, 1),
            SKIP => (dir, 2),
            _ => (dir, 1),
        };
        (((seat as i64 + dir * hops).rem_euclid(n as i64)) as usize, dir == 1)
    }

    #[test]
    fn reverse_and_skip_from_first_seat_both_reach_third() {
        for action in [REVERSE, SKIP] {
            let mut env = reverse_game_new(3, 5).unwrap();
            env.reset(0);
            env.step(Some(action)).unwrap();
            assert_eq!(env.agent_selection(), Some(seat(2)));
        }
    }

    #[test]
    fn rule_matches_table_for_all_actions_and_directions() {
        for n in 3..6 {
            for action in [PASS, REVERSE, SKIP] {
                for reversed_first in [false, true] {
                    let mut env = reverse_game_new(n, 10).unwrap();
                    env.reset(0);
                    let (mut cur, mut fwd) = (0, true);
                    if reversed_first {
                        env.step(Some(REVERSE)).unwrap();
                        (cur, fwd) = expected_next(0, true, REVERSE, n);
                    }
                    env.step(Some(action)).unwrap();
                    let (next, _) = expected_next(cur, fwd, action, n);
                    assert_eq!(env.agent_selection(), Some(seat(next)));
                }
            }
        }
    }

    #[test]
    fn passing_cycles_in_seat_order() {
        let mut env = reverse_game_new(3, 2).unwrap();
        env.reset(0);
        let mut iter = AgentIter::new(100);
        let mut seen = Vec::new();
        while let Some(agent) = iter.next(&env) {
            let done = env.status().unwrap().is_done(&agent);
            if !done {
                seen.push(agent);
            }
            env.step(if done { None } else { Some(PASS) }).unwrap();
        }
        assert_eq!(seen, [0, 1, 2, 0, 1, 2].map(seat));
        assert!(reverse_game_new(2, 1).is_err());
    }

    #[test]
    fn every_action_pays_its_actor() {
        let mut env = reverse_game_new(4, 1).unwrap();
        env.reset(0);
        env.step(Some(SKIP)).unwrap();
        assert_eq!(env.status().unwrap().rewards[&seat(0)], 1.0);
        assert_eq!(env.agent_selection(), Some(seat(2)));
    }
}
