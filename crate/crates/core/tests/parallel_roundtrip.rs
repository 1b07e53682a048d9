//! Parallel wrappers: round-trip identity, reward conservation and cycle structure.

use std::collections::BTreeMap;

use agentcycle::aec::{legal_actions, AecEnv, AgentId, AgentIter, EnvError, Transition};
use agentcycle::envs::{cleanup_new, make, pursuit_new, CleanupScenario, PursuitConfig, RewardMode, SteppingMode};
use agentcycle::wrappers::{from_parallel, to_parallel, ParallelEnv};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

/// Seeded random legal actions; the action stream depends only on `seed`.
fn trajectory(env: &mut dyn AecEnv, seed: u64, max_steps: usize) -> Vec<Transition> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    env.reset(seed);
    let mut out = Vec::new();
    for t in 0..max_steps as u64 {
        let Some(agent) = env.agent_selection() else { break };
        let done = env.status().unwrap().is_done(&agent);
        let action =
            if done || agent.is_env() { None } else { Some(*legal_actions(env, &agent).unwrap().choose(&mut rng).unwrap()) };
        env.step(action).unwrap();
        let s = env.status().unwrap();
        out.push(Transition { t, agent, action, rewards_emitted: s.rewards.clone(), dones_after: s.dones.clone() });
    }
    out
}

fn assert_round_trip(build: impl Fn() -> Box<dyn AecEnv>, seeds: std::ops::Range<u64>) {
    for seed in seeds {
        let mut direct = build();
        let mut wrapped = from_parallel(to_parallel(build()).unwrap());
        assert_eq!(trajectory(&mut direct, seed, 5_000), trajectory(&mut wrapped, seed, 5_000), "seed {seed}");
    }
}

#[test]
fn rps_round_trips() {
    assert_round_trip(|| make("rps", &Value::Null).unwrap(), 0..10);
}

#[test]
fn pursuit_round_trips_in_both_modes() {
    for mode in [RewardMode::Unpruned, RewardMode::Pruned] {
        let config = PursuitConfig { max_cycles: 100, ..PursuitConfig::small(mode) };
        assert_round_trip(|| Box::new(pursuit_new(config.clone()).unwrap()), 0..10);
    }
}

#[test]
fn cleanup_round_trips_without_apples() {
    for mode in [SteppingMode::Aec, SteppingMode::ParallelBuggy] {
        let mut config = CleanupScenario::fig5().with_mode(mode).config;
        config.max_cycles = 20;
        assert_round_trip(|| Box::new(cleanup_new(config.clone()).unwrap()), 0..5);
    }
}

#[test]
fn reverse_game_is_not_cycle_regular() {
    let env = make("reverse_game", &Value::Null).unwrap();
    assert!(matches!(to_parallel(env).err(), Some(EnvError::NotCycleRegular(_))));
}

#[test]
fn parallel_rewards_sum_the_sequential_cycle() {
    let config = PursuitConfig { max_cycles: 200, n_evaders: 6, n_pursuers: 4, ..PursuitConfig::small(RewardMode::Unpruned) };
    let mut seq = pursuit_new(config.clone()).unwrap();
    let mut par = to_parallel(pursuit_new(config).unwrap()).unwrap();
    seq.reset(9);
    par.reset(9);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    while !par.agents().is_empty() {
        let agents = par.agents();
        let actions: BTreeMap<AgentId, usize> = agents.iter().map(|a| (a.clone(), (0..5).collect::<Vec<_>>().choose(&mut rng).copied().unwrap())).collect();
        let mut sums: BTreeMap<AgentId, f64> = agents.iter().map(|a| (a.clone(), 0.0)).collect();
        // One sequential cycle: every pursuer, then env.
        loop {
            let agent = seq.agent_selection().unwrap();
            seq.step(if agent.is_env() { None } else { Some(actions[&agent]) }).unwrap();
            for (a, s) in sums.iter_mut() {
                *s += seq.status().unwrap().rewards.get(a).copied().unwrap_or(0.0);
            }
            if agent.is_env() {
                break;
            }
        }
        while let Some(a) = seq.agent_selection() {
            if !seq.status().unwrap().is_done(&a) {
                break;
            }
            seq.step(None).unwrap();
        }
        let out = par.step(&actions).unwrap();
        assert_eq!(out.rewards, sums);
        let keys: Vec<_> = out.observations.keys().cloned().collect();
        let mut sorted = agents.clone();
        sorted.sort();
        assert_eq!(keys, sorted, "keys are the agents live at cycle start");
    }
}

#[test]
fn one_parallel_step_is_one_pursuit_cycle() {
    let mut par = to_parallel(pursuit_new(PursuitConfig::small(RewardMode::Unpruned)).unwrap()).unwrap();
    par.reset(2);
    let actions = par.agents().into_iter().map(|a| (a, 4)).collect();
    par.step(&actions).unwrap();
    assert_eq!(par.inner().game().cycle(), 1);
}

#[test]
fn facade_iterates_each_live_agent_once_per_cycle_and_drops_done_agents() {
    let mut env = from_parallel(to_parallel(make("rps", &serde_json::json!({"num_rounds": 2})).unwrap()).unwrap());
    env.reset(0);
    let mut iter = AgentIter::new(100);
    let mut yields = Vec::new();
    while let Some(agent) = iter.next(&env) {
        let done = env.status().unwrap().is_done(&agent);
        yields.push((agent.to_string(), done));
        env.step(if done { None } else { Some(0) }).unwrap();
    }
    let names: Vec<&str> = yields.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["player_0", "player_1", "player_0", "player_1", "player_0", "player_1"]);
    assert!(yields[4].1 && yields[5].1, "final yields are the null steps");
    assert!(env.agents().is_empty());
}
