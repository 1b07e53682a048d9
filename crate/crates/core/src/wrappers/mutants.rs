//! Deliberately broken environments, each violating one contract the
//! compliance checker must catch.

use std::collections::{BTreeMap, BTreeSet};

use crate::aec::{Action, AecEnv, AgentId, EnvError, EnvStatus, GlobalState, Observation, SpaceSpec};
use crate::envs::{cleanup_new, pursuit_new, tictactoe_new, CleanupScenario, PursuitConfig, RewardMode};

/// Forwards everything to the wrapped environment except where a mutant overrides it.
macro_rules! forward_spaces {
    () => {
        fn name(&self) -> &str {
            self.inner.name()
        }
        fn state(&self) -> GlobalState {
            self.inner.state()
        }
        fn action_space(&self, agent: &AgentId) -> Result<SpaceSpec, EnvError> {
            self.inner.action_space(agent)
        }
        fn observation_space(&self, agent: &AgentId) -> Result<SpaceSpec, EnvError> {
            self.inner.observation_space(agent)
        }
        fn possible_agents(&self) -> Option<Vec<AgentId>> {
            self.inner.possible_agents()
        }
        fn cycle_regular(&self) -> bool {
            self.inner.cycle_regular()
        }
        fn has_env_agent(&self) -> bool {
            self.inner.has_env_agent()
        }
    };
}

/// Keeps a zero `rewards` entry for agents after they leave `agents`.
pub struct LeakyRewards<E> {
    inner: E,
    seen: BTreeSet<AgentId>,
    status: Option<EnvStatus>,
}

impl<E: AecEnv> LeakyRewards<E> {
    pub fn new(inner: E) -> Self {
        Self { inner, seen: BTreeSet::new(), status: None }
    }

    fn sync(&mut self) {
        self.status = self.inner.status().ok().cloned().map(|mut s| {
            self.seen.extend(s.agents.iter().cloned());
            for ghost in self.seen.iter().filter(|a| !s.agents.contains(a)) {
                s.rewards.entry(ghost.clone()).or_insert(0.0);
            }
            s
        });
    }
}

impl<E: AecEnv> AecEnv for LeakyRewards<E> {
    forward_spaces!();

    fn reset(&mut self, seed: u64) {
        self.seen.clear();
        self.inner.reset(seed);
        self.sync();
    }

    fn step(&mut self, action: Option<Action>) -> Result<(), EnvError> {
        self.inner.step(action)?;
        self.sync();
        Ok(())
    }

    fn observe(&self, agent: &AgentId) -> Result<Observation, EnvError> {
        self.inner.observe(agent)
    }

    fn status(&self) -> Result<&EnvStatus, EnvError> {
        self.status.as_ref().ok_or(EnvError::CalledBeforeReset)
    }

    fn recompute_observation(&self, agent: &AgentId) -> Option<Observation> {
        self.inner.recompute_observation(agent)
    }
}

/// Serves observations captured at the start of each cycle.
pub struct StaleObservations<E> {
    inner: E,
    cache: BTreeMap<AgentId, Observation>,
}

impl<E: AecEnv> StaleObservations<E> {
    pub fn new(inner: E) -> Self {
        Self { inner, cache: BTreeMap::new() }
    }

    fn snapshot(&mut self) {
        let agents = self.inner.agents().to_vec();
        self.cache = agents.into_iter().filter_map(|a| self.inner.observe(&a).ok().map(|o| (a, o))).collect();
    }
}

impl<E: AecEnv> AecEnv for StaleObservations<E> {
    forward_spaces!();

    fn reset(&mut self, seed: u64) {
        self.inner.reset(seed);
        self.snapshot();
    }

    fn step(&mut self, action: Option<Action>) -> Result<(), EnvError> {
        let actor = self.inner.agent_selection();
        self.inner.step(action)?;
        if actor.is_some_and(|a| a.is_env()) {
            self.snapshot();
        }
        Ok(())
    }

    fn observe(&self, agent: &AgentId) -> Result<Observation, EnvError> {
        match self.cache.get(agent) {
            Some(o) => Ok(o.clone()),
            None => self.inner.observe(agent),
        }
    }

    fn status(&self) -> Result<&EnvStatus, EnvError> {
        self.inner.status()
    }

    fn recompute_observation(&self, agent: &AgentId) -> Option<Observation> {
        self.inner.recompute_observation(agent)
    }
}

/// Ignores the reset seed: episode `k` of the instance is seeded with `k`.
pub struct SeedIgnoring<E> {
    inner: E,
    resets: u64,
}

impl<E: AecEnv> SeedIgnoring<E> {
    pub fn new(inner: E) -> Self {
        Self { inner, resets: 0 }
    }
}

impl<E: AecEnv> AecEnv for SeedIgnoring<E> {
    forward_spaces!();

    fn reset(&mut self, _seed: u64) {
        self.inner.reset(self.resets);
        self.resets += 1;
    }

    fn step(&mut self, action: Option<Action>) -> Result<(), EnvError> {
        self.inner.step(action)
    }

    fn observe(&self, agent: &AgentId) -> Result<Observation, EnvError> {
        self.inner.observe(agent)
    }

    fn status(&self) -> Result<&EnvStatus, EnvError> {
        self.inner.status()
    }

    fn recompute_observation(&self, agent: &AgentId) -> Option<Observation> {
        self.inner.recompute_observation(agent)
    }
}

/// A mutant with the name of the compliance check it is built to trip.
pub struct Mutant {
    pub name: &'static str,
    pub intended_check: &'static str,
    pub env: Box<dyn AecEnv>,
}

/// The three shipped mutants.
pub fn mutants() -> Vec<Mutant> {
    let mut stale_board = CleanupScenario::fig5().config;
    stale_board.max_cycles = 5;
    vec![
        Mutant {
            name: "tictactoe_leaky_rewards",
            intended_check: "key_sets",
            env: Box::new(LeakyRewards::new(tictactoe_new())),
        },
        Mutant {
            name: "cleanup_fig5_stale_observations",
            intended_check: "staleness",
            env: Box::new(StaleObservations::new(cleanup_new(stale_board).expect("valid board"))),
        },
        Mutant {
            name: "pursuit_seed_ignoring",
            intended_check: "determinism",
            env: Box::new(SeedIgnoring::new(
                pursuit_new(PursuitConfig::small(RewardMode::Unpruned)).expect("valid config"),
            )),
        },
    ]
}
