//! Matched-seed comparison of pruned and unpruned pursuit rewards.
//!
//! Both modes run the deterministic greedy pursuit policy on the same seeds,
//! so differences come only from the environment generator. In every cycle, at
//! the moment the `env` agent is about to move the evaders, the environment is
//! cloned and the env step resampled under fresh generator seeds; the spread
//! of the cycle's pursuer reward over those resamples is the reward variance
//! given the pre-env state and the pursuers' actions.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::policy::{build_driver, PolicySpec};
use super::HarnessError;
use crate::aec::{AecEnv, AgentId};
use crate::envs::grid::Pos;
use crate::envs::pursuit::{Pursuit, STAY};
use crate::envs::{pursuit_new, PursuitConfig, PursuitEnv, RewardMode};
use crate::exec::{map_indexed, Execution};

pub const DEFAULT_RESAMPLES: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModeSummary {
    pub mode: RewardMode,
    /// Team return (sum over pursuers) per episode.
    pub returns: Vec<f64>,
    pub mean_return: f64,
    pub std_return: f64,
    pub cycles: usize,
    pub capture_incidences: usize,
    pub mean_conditional_variance: f64,
    pub max_conditional_variance: f64,
}

/// One evader move in the near-capture scenario, with each pursuer's cycle reward.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NearCaptureRow {
    pub evader_move: usize,
    pub pruned: Vec<f64>,
    pub unpruned: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PruningSummary {
    pub config: PursuitConfig,
    pub episodes: usize,
    pub seed: u64,
    pub resamples: usize,
    pub pruned: ModeSummary,
    pub unpruned: ModeSummary,
    /// Unpruned cycles whose captures differ from those the pre-env positions would give.
    pub capture_set_differences: usize,
    pub capture_set_difference_fraction: f64,
    pub near_capture: Vec<NearCaptureRow>,
}

impl PruningSummary {
    /// Whether some evader move in the near-capture scenario separates the two modes.
    pub fn near_capture_differs(&self) -> bool {
        self.near_capture.iter().any(|r| r.pruned != r.unpruned)
    }
}

struct EpisodeStats {
    team_return: f64,
    cycles: usize,
    incidences: usize,
    variances: Vec<f64>,
    capture_set_differences: usize,
}

/// Population variance by Welford's update; exactly zero for identical samples.
fn variance(samples: &[f64]) -> f64 {
    let (mut mean, mut m2) = (0.0, 0.0);
    for (k, &x) in samples.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (x - mean);
    }
    if samples.is_empty() { 0.0 } else { m2 / samples.len() as f64 }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    (mean, variance(xs).sqrt())
}

fn pursuer_total(env: &PursuitEnv) -> f64 {
    env.status().map_or(0.0, |s| s.rewards.iter().filter(|(a, _)| !a.is_env()).map(|(_, r)| r).sum())
}

fn capture_cells(game: &Pursuit, pending: bool) -> BTreeSet<Pos> {
    let caps = if pending { game.pending_captures() } else { game.last_captures().to_vec() };
    caps.into_iter().map(|c| c.at).collect()
}

fn run_episode(config: &PursuitConfig, seed: u64, resamples: usize) -> Result<EpisodeStats, HarnessError> {
    let mut env = pursuit_new(config.clone())?;
    env.reset(seed);
    let mut driver = build_driver(&PolicySpec::GreedyPursuit, &env, seed)?;
    let mut stats =
        EpisodeStats { team_return: 0.0, cycles: 0, incidences: 0, variances: Vec::new(), capture_set_differences: 0 };
    let mut cycle_reward = 0.0;
    let mut steps = 0usize;
    let step_cap = (config.n_pursuers + 1) * (config.max_cycles + 1) + config.n_pursuers + 1;
    while let Some(agent) = env.agent_selection() {
        steps += 1;
        if steps > step_cap {
            break;
        }
        let done = env.status()?.is_done(&agent);
        if agent.is_env() && !done {
            let samples: Vec<f64> = (0..resamples as u64)
                .map(|k| {
                    let mut probe = env.clone();
                    probe.reseed_rng(seed.wrapping_mul(0x1_0000_0001).wrapping_add(stats.cycles as u64 * 1_000 + k));
                    probe.step(None).map(|_| cycle_reward + pursuer_total(&probe))
                })
                .collect::<Result<_, _>>()?;
            stats.variances.push(variance(&samples));
            let predicted = capture_cells(env.game(), true);
            env.step(None)?;
            if config.reward_mode == RewardMode::Unpruned && predicted != capture_cells(env.game(), false) {
                stats.capture_set_differences += 1;
            }
            stats.incidences += env.game().last_captures().iter().map(|c| c.pursuers.len()).sum::<usize>();
            stats.team_return += pursuer_total(&env);
            stats.cycles += 1;
            cycle_reward = 0.0;
            continue;
        }
        let action = if done || agent.is_env() { None } else { Some(driver.act(&env, &agent)?) };
        env.step(action)?;
        if config.reward_mode == RewardMode::Pruned {
            stats.incidences += env.game().last_captures().iter().map(|c| c.pursuers.len()).sum::<usize>();
        }
        let r = pursuer_total(&env);
        cycle_reward += r;
        stats.team_return += r;
    }
    Ok(stats)
}

fn summarize(mode: RewardMode, stats: &[EpisodeStats]) -> ModeSummary {
    let returns: Vec<f64> = stats.iter().map(|s| s.team_return).collect();
    let (mean_return, std_return) = mean_std(&returns);
    let variances: Vec<f64> = stats.iter().flat_map(|s| s.variances.iter().copied()).collect();
    ModeSummary {
        mode,
        mean_return,
        std_return,
        cycles: stats.iter().map(|s| s.cycles).sum(),
        capture_incidences: stats.iter().map(|s| s.incidences).sum(),
        mean_conditional_variance: mean_std(&variances).0,
        max_conditional_variance: variances.iter().copied().fold(0.0, f64::max),
        returns,
    }
}

/// Episode `e` uses environment seed `seed + e` in both modes.
pub fn pruning_experiment(
    config: &PursuitConfig,
    episodes: usize,
    seed: u64,
    resamples: usize,
    exec: Execution,
) -> Result<PruningSummary, HarnessError> {
    config.validate()?;
    let run_mode = |mode: RewardMode| -> Result<Vec<EpisodeStats>, HarnessError> {
        let cfg = PursuitConfig { reward_mode: mode, ..config.clone() };
        map_indexed(episodes, exec, |e| run_episode(&cfg, seed.wrapping_add(e as u64), resamples))
            .into_iter()
            .collect()
    };
    let pruned = run_mode(RewardMode::Pruned)?;
    let unpruned = run_mode(RewardMode::Unpruned)?;
    let differences: usize = unpruned.iter().map(|s| s.capture_set_differences).sum();
    let unpruned_summary = summarize(RewardMode::Unpruned, &unpruned);
    Ok(PruningSummary {
        config: config.clone(),
        episodes,
        seed,
        resamples,
        pruned: summarize(RewardMode::Pruned, &pruned),
        capture_set_differences: differences,
        capture_set_difference_fraction: if unpruned_summary.cycles == 0 {
            0.0
        } else {
            differences as f64 / unpruned_summary.cycles as f64
        },
        unpruned: unpruned_summary,
        near_capture: near_capture_table()?,
    })
}

/// Evader at (0,0) of the 8×8 board; the pursuers step from (2,0) and (0,2) onto
/// (1,0) and (0,1), closing every in-grid neighbour. Rows cover every legal
/// evader move for the following env step.
pub fn near_capture_table() -> Result<Vec<NearCaptureRow>, HarnessError> {
    let pursuers = [AgentId::indexed("pursuer", 0), AgentId::indexed("pursuer", 1)];
    let cycle = |mode: RewardMode, evader_move: usize| -> Result<Vec<f64>, HarnessError> {
        let mut env = pursuit_new(PursuitConfig::small(mode))?;
        env.reset(0);
        env.game_mut().set_positions(vec![Pos::new(2, 0), Pos::new(0, 2)], vec![Pos::new(0, 0)])?;
        env.refresh();
        let mut totals = [0.0; 2];
        let mut add = |env: &PursuitEnv| {
            for (t, p) in totals.iter_mut().zip(&pursuers) {
                *t += env.status().map_or(0.0, |s| s.rewards.get(p).copied().unwrap_or(0.0));
            }
        };
        env.step(Some(3))?; // West to (1,0).
        add(&env);
        env.step(Some(2))?; // South to (0,1).
        add(&env);
        env.game_mut().force_evader_moves(vec![evader_move]);
        env.step(None)?;
        add(&env);
        Ok(totals.to_vec())
    };
    let probe = {
        let mut env = pursuit_new(PursuitConfig::small(RewardMode::Unpruned))?;
        env.reset(0);
        env.game().evader_options(Pos::new(0, 0))
    };
    probe
        .into_iter()
        .map(|m| Ok(NearCaptureRow { evader_move: m, pruned: cycle(RewardMode::Pruned, m)?, unpruned: cycle(RewardMode::Unpruned, m)? }))
        .collect()
}

fn move_name(a: usize) -> &'static str {
    match a {
        0 => "north",
        1 => "east",
        2 => "south",
        3 => "west",
        STAY => "stay",
        _ => "?",
    }
}

impl fmt::Display for PruningSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.config;
        writeln!(
            f,
            "pursuit {}x{}, {} pursuers, {} evaders, {} episodes from seed {}, {} resamples per cycle",
            c.grid_width, c.grid_height, c.n_pursuers, c.n_evaders, self.episodes, self.seed, self.resamples
        )?;
        writeln!(
            f,
            "{:<10} {:>12} {:>12} {:>8} {:>10} {:>14} {:>14}",
            "mode", "mean_return", "std_return", "cycles", "incidences", "mean_cond_var", "max_cond_var"
        )?;
        for m in [&self.pruned, &self.unpruned] {
            let name = if m.mode == RewardMode::Pruned { "pruned" } else { "unpruned" };
            writeln!(
                f,
                "{:<10} {:>12.4} {:>12.4} {:>8} {:>10} {:>14.6} {:>14.6}",
                name, m.mean_return, m.std_return, m.cycles, m.capture_incidences, m.mean_conditional_variance, m.max_conditional_variance
            )?;
        }
        writeln!(
            f,
            "unpruned cycles with captures differing from the pre-env prediction: {} ({:.4})",
            self.capture_set_differences, self.capture_set_difference_fraction
        )?;
        writeln!(f, "near-capture scenario (pursuer rewards per evader move):")?;
        for r in &self.near_capture {
            writeln!(f, "  {:<6} pruned {:?} unpruned {:?}", move_name(r.evader_move), r.pruned, r.unpruned)?;
        }
        Ok(())
    }
}
