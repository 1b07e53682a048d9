//! Property tests of the sequential protocol over every bundled environment.

use std::collections::BTreeMap;

use agentcycle::aec::{legal_actions, AecEnv, AgentId, Transition};
use agentcycle::envs::{make, BUNDLED};
use proptest::prelude::*;
use serde_json::Value;

fn envs() -> Vec<&'static str> {
    BUNDLED.iter().copied().filter(|n| *n != "spec").collect()
}

/// Steps `env` with legal actions picked by `choices` (cycled), checking invariants as it goes.
fn drive(env: &mut dyn AecEnv, seed: u64, choices: &[usize], max_steps: usize) -> Vec<Transition> {
    env.reset(seed);
    let mut ledger: BTreeMap<AgentId, f64> = env.agents().iter().map(|a| (a.clone(), 0.0)).collect();
    let mut out = Vec::new();
    for t in 0..max_steps {
        let status = env.status().unwrap().clone();
        let Some(sel) = status.agent_selection.clone() else {
            assert!(status.agents.is_empty());
            break;
        };
        assert!(status.contains(&sel), "selection is live");
        for agent in &status.agents {
            let obs = env.observe(agent).unwrap();
            assert!(env.observation_space(agent).unwrap().contains(&obs));
            if let Some(fresh) = env.recompute_observation(agent) {
                assert_eq!(obs, fresh, "no stale observation for {agent}");
            }
        }
        let done = status.is_done(&sel);
        let action = if done || sel.is_env() {
            None
        } else {
            let legal = legal_actions(env, &sel).unwrap();
            Some(legal[choices[t % choices.len()] % legal.len()])
        };
        let before = status.agents.len();
        env.step(action).unwrap();
        let after = env.status().unwrap();
        if done {
            assert_eq!(after.agents.len(), before - 1, "null step removes exactly one agent");
        }
        let mut next = BTreeMap::new();
        for agent in &after.agents {
            let base = if *agent == sel { 0.0 } else { ledger[agent] };
            next.insert(agent.clone(), base + after.rewards[agent]);
            assert_eq!(after.cumulative_rewards[agent], next[agent], "ledger for {agent}");
        }
        ledger = next;
        out.push(Transition {
            t: t as u64,
            agent: sel,
            action,
            rewards_emitted: after.rewards.clone(),
            dones_after: after.dones.clone(),
        });
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn invariants_hold_and_runs_repeat(
        env_index in 0usize..5,
        seed in 0u64..1_000,
        choices in prop::collection::vec(0usize..64, 1..32),
    ) {
        let name = envs()[env_index];
        let config = if name == "pursuit" {
            serde_json::json!({"grid_width": 8, "grid_height": 8, "n_pursuers": 3, "n_evaders": 4, "max_cycles": 40})
        } else {
            Value::Null
        };
        let mut env = make(name, &config).unwrap();
        let a = drive(&mut env, seed, &choices, 400);
        let b = drive(&mut env, seed, &choices, 400);
        prop_assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}

#[test]
fn calls_before_reset_fail() {
    for name in envs() {
        let env = make(name, &Value::Null).unwrap();
        assert!(env.last(true).is_err(), "{name}");
        assert!(env.status().is_err());
    }
}

#[test]
fn out_of_space_and_null_misuse_are_rejected() {
    use agentcycle::aec::EnvError;
    let mut env = make("pursuit", &Value::Null).unwrap();
    env.reset(0);
    let before = env.status().unwrap().clone();
    assert!(matches!(env.step(Some(5)), Err(EnvError::OutOfSpaceAction { .. })));
    assert!(matches!(env.step(None), Err(EnvError::NullActionForLiveAgent(_))));
    assert_eq!(env.status().unwrap(), &before);
}
