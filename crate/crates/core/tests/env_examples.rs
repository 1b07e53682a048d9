//! Worked examples for the sequential protocol and the bundled environments.

use agentcycle::aec::{AecEnv, AgentId, AgentIter, GlobalState, SpaceSpec};
use agentcycle::envs::cleanup::{CleanupScenario, CLEAN};
use agentcycle::envs::pursuit::STAY;
use agentcycle::envs::reverse::{PASS, REVERSE, SKIP};
use agentcycle::envs::rps::{PAPER, ROCK, SCISSORS};
use agentcycle::envs::{
    cleanup_new, pursuit_new, reverse_game_new, rps_new, tictactoe_new, Pos, PursuitConfig, RewardMode,
};

fn id(name: &str) -> AgentId {
    AgentId::new(name).unwrap()
}

fn play(env: &mut dyn AecEnv, moves: &[usize]) {
    for &m in moves {
        env.step(Some(m)).unwrap();
    }
}

#[test]
fn tictactoe_top_row_win() {
    let mut env = tictactoe_new();
    env.reset(0);
    play(&mut env, &[0, 3, 1, 4, 2]);
    let s = env.status().unwrap();
    assert_eq!(s.rewards[&id("player_0")], 1.0);
    assert_eq!(s.rewards[&id("player_1")], -1.0);
    assert!(s.dones.values().all(|&d| d));
    // The loser's null step removes it.
    assert_eq!(env.agent_selection(), Some(id("player_1")));
    env.step(None).unwrap();
    assert!(!env.agents().contains(&id("player_1")));
}

#[test]
fn tictactoe_draw_and_illegal_move() {
    let mut env = tictactoe_new();
    env.reset(0);
    play(&mut env, &[0, 1, 2, 4, 3, 5, 7, 6, 8]);
    let s = env.status().unwrap();
    assert_eq!((s.rewards[&id("player_0")], s.rewards[&id("player_1")]), (0.0, 0.0));
    assert!(s.dones.values().all(|&d| d));

    let mut env = tictactoe_new();
    env.reset(0);
    env.step(Some(0)).unwrap();
    assert!(matches!(env.step(Some(0)), Err(agentcycle::aec::EnvError::IllegalMove { .. })));
}

#[test]
fn tictactoe_center_is_visible_to_both_and_iter_alternates() {
    let mut env = tictactoe_new();
    env.reset(0);
    assert_eq!(env.last(false).unwrap().cumulative_reward, 0.0);
    env.step(Some(4)).unwrap();
    assert_eq!(env.agent_selection(), Some(id("player_1")));
    for viewer in ["player_0", "player_1"] {
        let obs = env.observe(&id(viewer)).unwrap();
        assert_eq!(obs.at(&[1, 1, 0]), 1.0, "{viewer}");
    }
    let mut env = tictactoe_new();
    env.reset(0);
    let mut iter = AgentIter::new(4);
    let mut seen = Vec::new();
    let mut cells = [0, 4, 8, 2].into_iter();
    while let Some(agent) = iter.next(&env) {
        seen.push(agent.to_string());
        env.step(cells.next()).unwrap();
    }
    assert_eq!(seen, ["player_0", "player_1", "player_0", "player_1"]);
    assert_eq!(env.action_space(&id("player_0")).unwrap(), SpaceSpec::discrete(9));
}

#[test]
fn rps_payoffs_and_round_limit() {
    let mut env = rps_new(2).unwrap();
    env.reset(3);
    assert!(env.status().unwrap().cumulative_rewards.values().all(|&r| r == 0.0));
    env.step(Some(ROCK)).unwrap();
    assert!(env.status().unwrap().rewards.values().all(|&r| r == 0.0), "resolution waits for the cycle end");
    assert_eq!(env.agent_selection(), Some(id("player_1")));
    env.step(Some(PAPER)).unwrap();
    let s = env.status().unwrap();
    assert_eq!((s.rewards[&id("player_0")], s.rewards[&id("player_1")]), (-1.0, 1.0));
    let last = env.last(false).unwrap();
    assert_eq!((last.agent.as_str(), last.cumulative_reward, last.done), ("player_0", -1.0, false));
    play(&mut env, &[SCISSORS, SCISSORS]);
    let s = env.status().unwrap();
    assert_eq!((s.rewards[&id("player_0")], s.rewards[&id("player_1")]), (0.0, 0.0));
    assert!(s.dones.values().all(|&d| d), "done exactly after round 2");
    assert_eq!(env.state(), GlobalState::Unsupported);
    assert_eq!(env.action_space(&id("player_0")).unwrap(), SpaceSpec::discrete(3));
}

#[test]
fn reverse_game_ring_rules() {
    let seat = |i: usize| AgentId::indexed("seat", i);
    let mut env = reverse_game_new(3, 4).unwrap();
    env.reset(0);
    env.step(Some(REVERSE)).unwrap();
    assert_eq!(env.agent_selection(), Some(seat(2)), "reverse: c acts after a");
    env.reset(0);
    env.step(Some(SKIP)).unwrap();
    assert_eq!(env.agent_selection(), Some(seat(2)), "skip jumps b");
    env.reset(0);
    let mut order = Vec::new();
    for _ in 0..6 {
        order.push(env.agent_selection().unwrap());
        env.step(Some(PASS)).unwrap();
    }
    assert_eq!(order, [0, 1, 2, 0, 1, 2].map(seat));
    assert_eq!(env.status().unwrap().rewards[&seat(2)], 1.0);
}

#[test]
fn pursuit_spaces_state_and_reset_determinism() {
    let mut env = pursuit_new(PursuitConfig::default()).unwrap();
    env.reset(7);
    let first = env.state();
    env.reset(7);
    assert_eq!(env.state(), first);
    let p0 = id("pursuer_0");
    assert_eq!(env.action_space(&p0).unwrap(), SpaceSpec::discrete(5));
    assert_eq!(env.observe(&p0).unwrap().shape(), &[7, 7, 3]);

    let mut small = pursuit_new(PursuitConfig::small(RewardMode::Unpruned)).unwrap();
    small.reset(0);
    assert_eq!(small.state().tensor().unwrap().shape(), &[8, 8, 3]);
}

/// Runs one cycle from a fixed pre-env state with the env generator reseeded.
fn cycle_rewards(mode: RewardMode, env_seed: u64) -> Vec<f64> {
    let mut env = pursuit_new(PursuitConfig::small(mode)).unwrap();
    env.reset(0);
    env.game_mut().set_positions(vec![Pos::new(4, 6), Pos::new(3, 5)], vec![Pos::new(4, 5)]).unwrap();
    env.refresh();
    env.step(Some(STAY)).unwrap();
    env.step(Some(1)).unwrap();
    let mut totals = vec![0.0, 0.0];
    let collect = |env: &agentcycle::envs::PursuitEnv, totals: &mut Vec<f64>| {
        for (i, t) in totals.iter_mut().enumerate() {
            *t += env.status().unwrap().rewards[&AgentId::indexed("pursuer", i)];
        }
    };
    collect(&env, &mut totals);
    env.reseed_rng(env_seed);
    env.step(None).unwrap();
    collect(&env, &mut totals);
    totals
}

#[test]
fn pruned_rewards_ignore_the_env_generator() {
    let reference = cycle_rewards(RewardMode::Pruned, 0);
    for seed in 1..100 {
        assert_eq!(cycle_rewards(RewardMode::Pruned, seed), reference);
    }
}

#[test]
fn unpruned_cycle_reward_counts_incidences() {
    for seed in 0..20 {
        let mut env = pursuit_new(PursuitConfig { max_cycles: 50, ..PursuitConfig::default() }).unwrap();
        env.reset(seed);
        let mut rng_action = seed as usize;
        while let Some(agent) = env.agent_selection() {
            let done = env.status().unwrap().is_done(&agent);
            let action = if done || agent.is_env() { None } else { Some({ rng_action = (rng_action * 31 + 7) % 5; rng_action }) };
            env.step(action).unwrap();
            if agent.is_env() && !done {
                let total: f64 = env.status().unwrap().rewards.values().sum();
                let incidences: usize = env.game().last_captures().iter().map(|c| c.pursuers.len()).sum();
                assert!(total >= 0.0);
                assert_eq!(total, 5.0 * incidences as f64);
            }
        }
    }
}

#[test]
fn cleanup_fig5_observation_and_rewards() {
    let mut config = CleanupScenario::fig5().config;
    config.max_cycles = 3;
    let mut env = cleanup_new(config).unwrap();
    env.reset(0);
    let GlobalState::Tensor(start) = env.state() else { panic!("grid state") };
    assert_eq!((start.at(&[6, 3, 1]), start.at(&[6, 6, 1])), (1.0, 1.0));
    env.step(Some(CLEAN)).unwrap();
    let view = env.observe(&id("agent_1")).unwrap();
    assert_eq!((view.at(&[6, 3, 0]), view.at(&[6, 3, 1])), (1.0, 0.0), "(6,3) now clean river");
    env.step(Some(CLEAN)).unwrap();
    env.step(None).unwrap();
    assert_eq!(env.game().cleaned_total(), 2);
    let s = env.status().unwrap();
    assert_eq!(s.cumulative_rewards[&id("agent_0")], 0.0);
    assert_eq!(s.cumulative_rewards[&id("agent_1")], 0.0);
}

#[test]
fn cleanup_aec_mode_relabeling_keeps_the_board_for_separate_moves() {
    // Agents far apart, each moving once then cleaning into open land.
    let base = CleanupScenario::fig5();
    let mut config = base.config.clone();
    config.waste.clear();
    config.max_cycles = 2;
    let boards: Vec<_> = [[0, 1], [1, 0]]
        .iter()
        .map(|perm| {
            let sc = agentcycle::envs::CleanupScenario { config: config.clone(), script: vec![vec![2, CLEAN], vec![3, CLEAN]] }
                .permuted(perm);
            let mut env = cleanup_new(sc.config.clone()).unwrap();
            env.reset(0);
            let mut turn = [0usize; 2];
            while let Some(agent) = env.agent_selection() {
                let s = env.status().unwrap();
                let action = if s.is_done(&agent) || agent.is_env() {
                    None
                } else {
                    let label: usize = agent.as_str()["agent_".len()..].parse().unwrap();
                    turn[label] += 1;
                    Some(sc.script[label][turn[label] - 1])
                };
                env.step(action).unwrap();
            }
            env.state()
        })
        .collect();
    assert_eq!(boards[0], boards[1]);
}
