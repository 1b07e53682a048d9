//! Differential testing over internal resolution orders.
//!
//! The same scenario runs once per permutation of the agents' internal
//! resolution order, with fixed policies and a fixed environment seed. A run
//! also counts stale observations: steps where `observe` disagreed with the
//! observation recomputed from the live state, plus actions that resolved
//! against a board other than the one their agent saw. Divergence means that
//! outcomes differ across orders *and* some agent acted on a stale view; order
//! dependence alone is legitimate when every agent saw the true state.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use super::digest::digest;
use super::policy::{build_driver, PolicySpec, POLICY_SALT};
use super::HarnessError;
use crate::aec::{Action, AecEnv, AgentId};
use crate::envs::cleanup::{CleanupScenario, STAY as CLEANUP_STAY};
use crate::envs::{cleanup_new, pursuit_new, rps_with, PursuitConfig, RpsConfig, SteppingMode};

pub const DEFAULT_MAX_STEPS: usize = 100_000;

#[derive(Clone, Debug, PartialEq)]
pub struct RaceOptions {
    pub trials: usize,
    pub seed: u64,
    /// Overrides the cleanup scenario's stepping mode.
    pub mode: Option<SteppingMode>,
    pub max_steps: usize,
}

impl RaceOptions {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self { trials, seed, mode: None, max_steps: DEFAULT_MAX_STEPS }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderOutcome {
    /// `order[k]` is the original agent resolved at internal position `k`.
    pub order: Vec<usize>,
    pub digest: String,
    pub summary: Value,
    pub stale_observations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RaceReport {
    pub env: String,
    pub trials_run: usize,
    /// Whether every permutation was run (done whenever `n! <= trials`).
    pub exhaustive: bool,
    pub runs: Vec<OrderOutcome>,
    /// Distinct outcome digests with one summary each.
    pub outcomes: BTreeMap<String, Value>,
    pub stale_observations: usize,
    pub divergence: bool,
}

impl RaceReport {
    pub fn distinct(&self) -> usize {
        self.outcomes.len()
    }
}

/// Environments: `cleanup_fig5` (bundled board when `scenario` is null),
/// `cleanup` (scenario with `config` and `script`), `rps` (an `RpsConfig`)
/// and `pursuit` (a `PursuitConfig`, driven by greedy pursuit).
pub fn race_detect(env_name: &str, scenario: &Value, opts: &RaceOptions) -> Result<RaceReport, HarnessError> {
    let mismatch = |e: serde_json::Error| HarnessError::ScenarioMismatch(e.to_string());
    let or_default = |v: &Value| if v.is_null() { json!({}) } else { v.clone() };
    let runner: Box<dyn Fn(&[usize]) -> Result<OrderOutcome, HarnessError>> = match env_name {
        "cleanup" | "cleanup_fig5" => {
            let mut sc: CleanupScenario = match (env_name, scenario) {
                ("cleanup_fig5", Value::Null) => CleanupScenario::fig5(),
                _ => serde_json::from_value(scenario.clone()).map_err(mismatch)?,
            };
            if let Some(mode) = opts.mode {
                sc.config.stepping_mode = mode;
            }
            if sc.script.is_empty() {
                return Err(HarnessError::ScenarioMismatch("race detection needs a scripted scenario".into()));
            }
            if sc.script.len() != sc.config.agent_starts.len() {
                return Err(HarnessError::ScenarioMismatch("one script row per agent start".into()));
            }
            let max_steps = opts.max_steps;
            Box::new(move |perm| run_cleanup(&sc, perm, max_steps))
        }
        "rps" => {
            let config: RpsConfig = serde_json::from_value(or_default(scenario)).map_err(mismatch)?;
            let (seed, max_steps) = (opts.seed, opts.max_steps);
            Box::new(move |perm| {
                let env = rps_with(RpsConfig { order: perm.to_vec(), ..config.clone() })?;
                run_with_agent_policies(Box::new(env), perm, seed, max_steps)
            })
        }
        "pursuit" => {
            let config: PursuitConfig = serde_json::from_value(or_default(scenario)).map_err(mismatch)?;
            let (seed, max_steps) = (opts.seed, opts.max_steps);
            Box::new(move |perm| {
                let env = pursuit_new(PursuitConfig { order: Some(perm.to_vec()), ..config.clone() })?;
                run_greedy(Box::new(env), perm, seed, max_steps)
            })
        }
        other => {
            return Err(HarnessError::ScenarioMismatch(format!("{other} does not support order permutation")))
        }
    };
    let n = match env_name {
        "rps" => 2,
        "pursuit" => {
            let c: PursuitConfig = serde_json::from_value(or_default(scenario)).map_err(mismatch)?;
            c.n_pursuers
        }
        _ => {
            let sc: CleanupScenario = match scenario {
                Value::Null => CleanupScenario::fig5(),
                v => serde_json::from_value(v.clone()).map_err(mismatch)?,
            };
            sc.config.agent_starts.len()
        }
    };
    let (orders, exhaustive) = orders(n, opts.trials, opts.seed);
    let runs = orders.iter().map(|p| runner(p)).collect::<Result<Vec<_>, _>>()?;
    let outcomes: BTreeMap<String, Value> = runs.iter().map(|r| (r.digest.clone(), r.summary.clone())).collect();
    let stale_observations = runs.iter().map(|r| r.stale_observations).sum();
    Ok(RaceReport {
        env: env_name.to_string(),
        trials_run: runs.len(),
        exhaustive,
        divergence: outcomes.len() > 1 && stale_observations > 0,
        runs,
        outcomes,
        stale_observations,
    })
}

/// All permutations in lexicographic order when `n! <= trials`, else `trials` seeded shuffles.
fn orders(n: usize, trials: usize, seed: u64) -> (Vec<Vec<usize>>, bool) {
    let fits = (1..=n).try_fold(1usize, |acc, k| acc.checked_mul(k)).is_some_and(|f| f <= trials);
    if fits {
        let mut all = Vec::new();
        permute(&mut (0..n).collect(), 0, &mut all);
        all.sort();
        return (all, true);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let orders = (0..trials)
        .map(|_| {
            let mut p: Vec<usize> = (0..n).collect();
            p.shuffle(&mut rng);
            p
        })
        .collect();
    (orders, false)
}

fn permute(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, out);
        items.swap(k, i);
    }
}

fn stale(env: &dyn AecEnv, agent: &AgentId) -> bool {
    match (env.observe(agent), env.recompute_observation(agent)) {
        (Ok(seen), Some(fresh)) => seen != fresh,
        _ => false,
    }
}

/// Label `k` receives start and script `perm[k]`; exhausted scripts stay.
fn run_cleanup(sc: &CleanupScenario, perm: &[usize], max_steps: usize) -> Result<OrderOutcome, HarnessError> {
    let permuted = sc.permuted(perm);
    let mut env = cleanup_new(permuted.config.clone())?;
    env.reset(0);
    let mut turns = vec![0usize; perm.len()];
    let mut stale_count = 0;
    for _ in 0..max_steps {
        let status = env.status()?;
        let Some(agent) = status.agent_selection.clone() else { break };
        let action: Option<Action> = if status.is_done(&agent) || agent.is_env() {
            None
        } else {
            stale_count += stale(&env, &agent) as usize;
            let label = env.possible_agents().unwrap_or_default().iter().position(|a| *a == agent).unwrap_or(0);
            let a = permuted.script[label].get(turns[label]).copied().unwrap_or(CLEANUP_STAY);
            turns[label] += 1;
            Some(a)
        };
        env.step(action)?;
        if agent.is_env() {
            let infos = &env.status()?.infos;
            stale_count += infos.values().filter(|i| i.get("stale_resolution") == Some(&json!(true))).count();
        }
    }
    let state = env.state();
    let summary = json!({
        "cleaned": env.game().cleaned_total(),
        "waste_left": env.game().waste_tiles(),
    });
    Ok(OrderOutcome {
        order: perm.to_vec(),
        digest: digest(&(&summary, state.tensor())),
        summary,
        stale_observations: stale_count,
    })
}

/// Each agent draws from its own stream keyed by its name, so its action
/// sequence does not depend on the order in which agents are asked.
fn run_with_agent_policies(
    mut env: Box<dyn AecEnv>,
    perm: &[usize],
    seed: u64,
    max_steps: usize,
) -> Result<OrderOutcome, HarnessError> {
    env.reset(seed);
    let mut rngs: BTreeMap<AgentId, ChaCha8Rng> = BTreeMap::new();
    let mut returns: BTreeMap<AgentId, f64> = BTreeMap::new();
    let mut stale_count = 0;
    for _ in 0..max_steps {
        let status = env.status()?;
        let Some(agent) = status.agent_selection.clone() else { break };
        let action = if status.is_done(&agent) || agent.is_env() {
            None
        } else {
            stale_count += stale(env.as_ref(), &agent) as usize;
            let rng = rngs.entry(agent.clone()).or_insert_with(|| {
                ChaCha8Rng::seed_from_u64(seed ^ POLICY_SALT ^ u64::from_str_radix(&digest(agent.as_str()), 16).unwrap_or(0))
            });
            let legal = crate::aec::legal_actions(env.as_ref(), &agent)?;
            Some(*legal.choose(rng).ok_or_else(|| HarnessError::PolicySpaceMismatch(format!("{agent} has no actions")))?)
        };
        env.step(action)?;
        for (a, r) in &env.status()?.rewards {
            *returns.entry(a.clone()).or_insert(0.0) += r;
        }
    }
    finish(env.as_ref(), perm, returns, stale_count)
}

fn run_greedy(mut env: Box<dyn AecEnv>, perm: &[usize], seed: u64, max_steps: usize) -> Result<OrderOutcome, HarnessError> {
    env.reset(seed);
    let mut driver = build_driver(&PolicySpec::GreedyPursuit, env.as_ref(), seed)?;
    let mut returns: BTreeMap<AgentId, f64> = BTreeMap::new();
    let mut stale_count = 0;
    for _ in 0..max_steps {
        let status = env.status()?;
        let Some(agent) = status.agent_selection.clone() else { break };
        let action = if status.is_done(&agent) || agent.is_env() {
            None
        } else {
            stale_count += stale(env.as_ref(), &agent) as usize;
            Some(driver.act(env.as_ref(), &agent)?)
        };
        env.step(action)?;
        for (a, r) in &env.status()?.rewards {
            *returns.entry(a.clone()).or_insert(0.0) += r;
        }
    }
    finish(env.as_ref(), perm, returns, stale_count)
}

fn finish(
    env: &dyn AecEnv,
    perm: &[usize],
    returns: BTreeMap<AgentId, f64>,
    stale_observations: usize,
) -> Result<OrderOutcome, HarnessError> {
    let summary = json!({ "returns": returns });
    let state = env.state();
    Ok(OrderOutcome {
        order: perm.to_vec(),
        digest: digest(&(&summary, state.tensor())),
        summary,
        stale_observations,
    })
}
