//! Seeded random specs for property tests and equivalence batteries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::spec::*;

/// Upper bounds for generated games; every size is drawn uniformly in `1..=max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub max_states: usize,
    pub max_agents: usize,
    pub max_actions: usize,
    pub max_observations: usize,
    /// AEC only: give some reward rows two outcomes `{0, 1}`.
    pub stochastic_rewards: bool,
}

impl Default for GenParams {
    fn default() -> Self {
        Self { max_states: 3, max_agents: 3, max_actions: 2, max_observations: 2, stochastic_rewards: false }
    }
}

/// Random distribution over `0..n` with a random nonempty support.
fn random_row(rng: &mut ChaCha8Rng, n: usize) -> Vec<(usize, f64)> {
    let mut support: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.6)).collect();
    if support.is_empty() {
        support.push(rng.gen_range(0..n));
    }
    let weights: Vec<f64> = support.iter().map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    support.into_iter().zip(weights).map(|(k, w)| (k, w / total)).collect()
}

pub fn random_posg(params: &GenParams, seed: u64) -> PosgSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s_count = rng.gen_range(1..=params.max_states);
    let n = rng.gen_range(1..=params.max_agents);
    let actions: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=params.max_actions)).collect();
    let observations: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=params.max_observations)).collect();
    let n_joint: usize = actions.iter().product();
    let mut spec = PosgSpec {
        num_states: s_count,
        initial_state: rng.gen_range(0..s_count),
        num_agents: n,
        actions: actions.clone(),
        observations: observations.clone(),
        transitions: vec![],
        rewards: vec![],
        observation_fn: vec![],
        derivation: None,
    };
    for s in 0..s_count {
        for j in 0..n_joint {
            let joint = decode_joint(&actions, j);
            for (next, p) in random_row(&mut rng, s_count) {
                spec.transitions.push(PosgTransition { state: s, joint: joint.clone(), next, p });
                for agent in 0..n {
                    let value = rng.gen_range(-2..=2) as f64;
                    if value != 0.0 {
                        spec.rewards.push(PosgReward { agent, state: s, joint: joint.clone(), next, value });
                    }
                }
            }
        }
    }
    for agent in 0..n {
        for action in 0..actions[agent] {
            for state in 0..s_count {
                for (obs, p) in random_row(&mut rng, observations[agent]) {
                    spec.observation_fn.push(PosgObservation { agent, action, state, obs, p });
                }
            }
        }
    }
    spec
}

pub fn random_aec(params: &GenParams, seed: u64) -> AecSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s_count = rng.gen_range(1..=params.max_states);
    let n = rng.gen_range(1..=params.max_agents);
    let actions: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=params.max_actions)).collect();
    let observations: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=params.max_observations)).collect();
    let mut spec = AecSpec {
        num_states: s_count,
        initial_state: rng.gen_range(0..s_count),
        num_agents: n,
        first_actor: rng.gen_range(0..=n),
        actions: actions.clone(),
        observations: observations.clone(),
        agent_transitions: vec![],
        env_transitions: vec![],
        reward_sets: None,
        rewards: vec![],
        observation_fn: vec![],
        next_agent: vec![],
        derivation: None,
    };
    let actor_actions = |j: usize| if j == 0 { 1 } else { actions[j - 1] };
    for s in 0..s_count {
        for (next, p) in random_row(&mut rng, s_count) {
            spec.env_transitions.push(EnvTransition { state: s, next, p });
        }
        for agent in 1..=n {
            for action in 0..actions[agent - 1] {
                spec.agent_transitions.push(AgentTransition { agent, state: s, action, next: rng.gen_range(0..s_count) });
            }
            for (obs, p) in random_row(&mut rng, observations[agent - 1]) {
                spec.observation_fn.push(AecObservation { agent, state: s, obs, p });
            }
        }
        for actor in 0..=n {
            for action in 0..actor_actions(actor) {
                for (next, p) in random_row(&mut rng, n + 1) {
                    spec.next_agent.push(NextAgent { state: s, actor, action, next, p });
                }
            }
        }
    }

    // Reward rows over every reachable (s, actor, a, s').
    let mut rows = Vec::new();
    for s in 0..s_count {
        for actor in 0..=n {
            for action in 0..actor_actions(actor) {
                let succ: Vec<usize> = if actor == 0 {
                    spec.env_transitions.iter().filter(|t| t.state == s).map(|t| t.next).collect()
                } else {
                    spec.agent_transitions
                        .iter()
                        .filter(|t| t.agent == actor && t.state == s && t.action == action)
                        .map(|t| t.next)
                        .collect()
                };
                rows.extend(succ.into_iter().map(|next| (s, actor, action, next)));
            }
        }
    }
    let mut forced = params.stochastic_rewards;
    for &(state, actor, action, next) in &rows {
        for agent in 1..=n {
            let entry = |value: f64, p: f64| AecReward { agent, state, actor, action, next, value, p };
            if params.stochastic_rewards {
                if forced || rng.gen_bool(0.3) {
                    forced = false;
                    let p: f64 = rng.gen_range(0.2..0.8);
                    spec.rewards.push(entry(1.0, p));
                    spec.rewards.push(entry(0.0, 1.0 - p));
                } else if rng.gen_bool(0.3) {
                    spec.rewards.push(entry(1.0, 1.0));
                }
            } else {
                let value = rng.gen_range(-2..=2) as f64;
                if value != 0.0 {
                    spec.rewards.push(entry(value, 1.0));
                }
            }
        }
    }
    spec
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formal::{compile_aec, validate_aec, validate_posg};

    #[test]
    fn generated_specs_are_valid_and_reproducible() {
        for seed in 0..50 {
            let p = random_posg(&GenParams::default(), seed);
            assert!(validate_posg(&p).is_empty(), "seed {seed}: {}", validate_posg(&p));
            assert_eq!(p, random_posg(&GenParams::default(), seed));
            let params = GenParams { stochastic_rewards: seed % 2 == 0, ..GenParams::default() };
            let a = random_aec(&params, seed);
            assert!(validate_aec(&a).is_empty(), "seed {seed}: {}", validate_aec(&a));
        }
    }

    #[test]
    fn stochastic_flag_yields_nondeterministic_rewards() {
        let params = GenParams { stochastic_rewards: true, ..GenParams::default() };
        for seed in 0..10 {
            let c = compile_aec(&random_aec(&params, seed)).unwrap();
            assert!(!c.has_deterministic_rewards());
            assert_eq!(c.reward_sets[1], vec![0.0, 1.0]);
        }
    }
}
