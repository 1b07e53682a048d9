//! Sampling single trajectories from tabular specs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aec::{AecEnv, Observation};

use super::policy::{sample_index, PolicyProfile};
use super::spec_env::SpecGame;
use super::validate::compile_posg;
use super::{AecSpec, FormalError, PosgSpec};

/// Salt separating the policy generator from the environment generator.
const POLICY_STREAM: u64 = 0x5eed_0f_a9e7;

/// `states` has `horizon + 1` entries. For a POSG `actions[t]` is the joint
/// action; for an AEC it is the single action of `actors[t]` (the env plays 0).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecTrajectory {
    pub states: Vec<usize>,
    pub actors: Vec<usize>,
    pub actions: Vec<Vec<usize>>,
    /// `rewards[t][k]` for POSG agent `k` / AEC agent `k + 1`.
    pub rewards: Vec<Vec<f64>>,
}

/// Samples `horizon` joint steps.
pub fn simulate_posg(
    spec: &PosgSpec,
    profile: &PolicyProfile,
    horizon: usize,
    seed: u64,
) -> Result<SpecTrajectory, FormalError> {
    let c = compile_posg(spec)?;
    profile.check(&c.actions, &c.observations)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = c.initial;
    let mut prev = vec![0; c.n_agents];
    let mut out = SpecTrajectory { states: vec![s], actors: vec![], actions: vec![], rewards: vec![] };
    for _ in 0..horizon {
        let joint: Vec<usize> = (0..c.n_agents)
            .map(|i| {
                let row = &c.obs_fn[i][prev[i]][s];
                let weights: Vec<f64> = row.iter().map(|&(_, p)| p).collect();
                let obs = row[sample_index(&weights, &mut rng)].0;
                profile.policies[i].sample(obs, &mut rng)
            })
            .collect();
        let branches = c.row(s, super::encode_joint(&c.actions, &joint));
        let weights: Vec<f64> = branches.iter().map(|b| b.p).collect();
        let b = &branches[sample_index(&weights, &mut rng)];
        s = b.next;
        out.states.push(s);
        out.rewards.push(b.rewards.clone());
        out.actions.push(joint.clone());
        prev = joint;
    }
    Ok(out)
}

/// Samples `horizon` agent or environment steps by running the spec as a
/// sequential environment.
pub fn simulate_aec(
    spec: &AecSpec,
    profile: &PolicyProfile,
    horizon: usize,
    seed: u64,
) -> Result<SpecTrajectory, FormalError> {
    let mut env = SpecGame::env(spec, None)?;
    let c = env.game().compiled();
    profile.check(&c.actions[1..], &c.observations[1..])?;
    let n = c.n_agents;
    let mut policy_rng = ChaCha8Rng::seed_from_u64(seed ^ POLICY_STREAM);
    env.reset(seed);
    let mut out = SpecTrajectory {
        states: vec![env.game().state_index()],
        actors: vec![],
        actions: vec![],
        rewards: vec![],
    };
    for _ in 0..horizon {
        let agent = env.agent_selection().expect("spec env without horizon never ends");
        let j = env.game().actor_index(&agent).expect("spec agents are indexed");
        let action = if j == 0 {
            None
        } else {
            let Ok(Observation::Discrete(obs)) = env.observe(&agent) else {
                unreachable!("spec observations are discrete")
            };
            Some(profile.policies[j - 1].sample(obs, &mut policy_rng))
        };
        env.step(action).expect("sampled actions lie in their spaces");
        let status = env.status().expect("reset was called");
        out.actors.push(j);
        out.actions.push(vec![action.unwrap_or(0)]);
        out.rewards.push(
            (1..=n).map(|i| status.rewards[&crate::aec::AgentId::indexed("agent", i)]).collect(),
        );
        out.states.push(env.game().state_index());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formal::spec::*;

    #[test]
    fn deterministic_chain_ignores_seed() {
        let spec = PosgSpec {
            num_states: 4,
            initial_state: 0,
            num_agents: 1,
            actions: vec![2],
            observations: vec![1],
            transitions: (0..4)
                .flat_map(|s| (0..2).map(move |a| PosgTransition { state: s, joint: vec![a], next: (s + 1).min(3), p: 1.0 }))
                .collect(),
            rewards: vec![],
            observation_fn: (0..4)
                .flat_map(|s| (0..2).map(move |a| PosgObservation { agent: 0, action: a, state: s, obs: 0, p: 1.0 }))
                .collect(),
            derivation: None,
        };
        let profile = PolicyProfile::uniform(&[2], &[1]);
        for seed in 0..5 {
            let t = simulate_posg(&spec, &profile, 3, seed).unwrap();
            assert_eq!(t.states, vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn matching_pennies_is_seed_deterministic() {
        let mut spec = PosgSpec {
            num_states: 2,
            initial_state: 0,
            num_agents: 2,
            actions: vec![2, 2],
            observations: vec![1, 1],
            transitions: vec![],
            rewards: vec![],
            observation_fn: vec![],
            derivation: None,
        };
        for s in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    let win = if a == b { 1.0 } else { -1.0 };
                    spec.transitions.push(PosgTransition { state: s, joint: vec![a, b], next: usize::from(a == b), p: 1.0 });
                    spec.rewards.push(PosgReward { agent: 0, state: s, joint: vec![a, b], next: usize::from(a == b), value: win });
                    spec.rewards.push(PosgReward { agent: 1, state: s, joint: vec![a, b], next: usize::from(a == b), value: -win });
                }
                for i in 0..2 {
                    spec.observation_fn.push(PosgObservation { agent: i, action: a, state: s, obs: 0, p: 1.0 });
                }
            }
        }
        let profile = PolicyProfile::uniform(&[2, 2], &[1, 1]);
        let a = simulate_posg(&spec, &profile, 20, 1).unwrap();
        let b = simulate_posg(&spec, &profile, 20, 1).unwrap();
        assert_eq!(a, b);
        assert!(a.rewards.iter().all(|r| r[0] == -r[1]));
    }
}
