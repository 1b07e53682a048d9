//! Seeded random-legal-action episodes checked against the sequential API contract.
//!
//! Checks, by report name:
//! * `declared_spaces`: every live agent's spaces are well formed.
//! * `selection_membership`: `agent_selection` is a live agent, and `None` only when none are.
//! * `key_sets`: `rewards`, `cumulative_rewards`, `dones` and `infos` are keyed by exactly `agents`.
//! * `possible_agents`: live agents are a subset of `possible_agents` when declared.
//! * `observation_space`: each live agent's observation lies in its declared space.
//! * `staleness`: `observe` agrees with the recomputed observation where one is offered.
//! * `action_rejection`: invalid steps (null for a live agent, non-null for a done or env
//!   agent, out-of-space actions) fail and leave the environment unchanged.
//! * `action_acceptance`: legal steps succeed.
//! * `done_protocol`: done flags never clear, and a null step removes the done agent.
//! * `reward_ledger`: `cumulative_rewards` and `last()` match an independent ledger.
//! * `determinism`: a second run with the same seeds reproduces every transition and observation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::aec::{legal_actions, Action, AecEnv, AgentId, EnvError, EnvStatus, Transition};
use crate::harness::digest::digest;

/// Step cap per episode; episodes that hit it simply stop.
pub const DEFAULT_MAX_STEPS: usize = 100_000;

const POLICY_SALT: u64 = 0xc0_11_a9_ce;
const LEDGER_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ComplianceViolation {
    pub check: String,
    pub episode: usize,
    pub step: u64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ComplianceReport {
    pub env: String,
    pub episodes: usize,
    pub seed: u64,
    pub checks_run: u64,
    pub violations: Vec<ComplianceViolation>,
}

impl ComplianceReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, check: &str) -> bool {
        self.violations.iter().any(|v| v.check == check)
    }
}

impl fmt::Display for ComplianceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{}: {} checks over {} episodes (seed {}), {} violations",
            self.env,
            self.checks_run,
            self.episodes,
            self.seed,
            self.violations.len()
        )?;
        for v in &self.violations {
            writeln!(f, "  [{}] episode {} step {}: {}", v.check, v.episode, v.step, v.detail)?;
        }
        Ok(())
    }
}

pub fn api_check(env: &mut dyn AecEnv, episodes: usize, seed: u64) -> ComplianceReport {
    api_check_with(env, episodes, seed, DEFAULT_MAX_STEPS)
}

/// Runs each episode twice with seed `seed + episode`; the first run is checked,
/// the second only feeds the determinism comparison.
pub fn api_check_with(env: &mut dyn AecEnv, episodes: usize, seed: u64, max_steps: usize) -> ComplianceReport {
    let mut checker = Checker { checks_run: 0, violations: Vec::new(), episode: 0, step: 0, active: true };
    for episode in 0..episodes {
        let episode_seed = seed.wrapping_add(episode as u64);
        checker.episode = episode;
        checker.active = true;
        let first = run_episode(env, episode_seed, max_steps, &mut checker);
        checker.active = false;
        let second = run_episode(env, episode_seed, max_steps, &mut checker);
        checker.active = true;
        checker.checks_run += 1;
        if let Some((step, detail)) = first_difference(&first, &second) {
            checker.step = step;
            checker.fail("determinism", detail);
        }
    }
    ComplianceReport {
        env: env.name().to_string(),
        episodes,
        seed,
        checks_run: checker.checks_run,
        violations: checker.violations,
    }
}

struct Checker {
    checks_run: u64,
    violations: Vec<ComplianceViolation>,
    episode: usize,
    step: u64,
    active: bool,
}

impl Checker {
    /// Records one check; `None` means it passed.
    fn check(&mut self, name: &str, outcome: Option<String>) {
        if !self.active {
            return;
        }
        self.checks_run += 1;
        if let Some(detail) = outcome {
            self.fail(name, detail);
        }
    }

    fn fail(&mut self, name: &str, detail: String) {
        self.violations.push(ComplianceViolation {
            check: name.to_string(),
            episode: self.episode,
            step: self.step,
            detail,
        });
    }
}

type EpisodeLog = Vec<(Transition, String)>;

fn first_difference(a: &EpisodeLog, b: &EpisodeLog) -> Option<(u64, String)> {
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        if x.1 != y.1 {
            return Some((i as u64, format!("observation of {} differs between identical runs", x.0.agent)));
        }
        if x.0 != y.0 {
            return Some((i as u64, format!("transition by {} differs between identical runs", x.0.agent)));
        }
    }
    (a.len() != b.len()).then(|| {
        (a.len().min(b.len()) as u64, format!("episode lengths {} and {} differ", a.len(), b.len()))
    })
}

fn key_set_mismatch<V>(name: &str, map: &BTreeMap<AgentId, V>, agents: &BTreeSet<&AgentId>) -> Option<String> {
    if let Some(extra) = map.keys().find(|k| !agents.contains(k)) {
        return Some(format!("{name} key not in agents: {extra}"));
    }
    agents.iter().find(|a| !map.contains_key(**a)).map(|missing| format!("{name} missing live agent {missing}"))
}

fn check_status(c: &mut Checker, env: &dyn AecEnv, status: &EnvStatus) {
    let agents: BTreeSet<&AgentId> = status.agents.iter().collect();
    let selection = match (&status.agent_selection, status.agents.is_empty()) {
        (None, true) => None,
        (None, false) => Some("no agent selected while agents are live".to_string()),
        (Some(a), _) if !agents.contains(a) => Some(format!("selected agent {a} is not live")),
        _ => None,
    };
    c.check("selection_membership", selection);
    for (name, outcome) in [
        ("rewards", key_set_mismatch("rewards", &status.rewards, &agents)),
        ("cumulative_rewards", key_set_mismatch("cumulative_rewards", &status.cumulative_rewards, &agents)),
        ("dones", key_set_mismatch("dones", &status.dones, &agents)),
        ("infos", key_set_mismatch("infos", &status.infos, &agents)),
    ] {
        let _ = name;
        c.check("key_sets", outcome);
    }
    if let Some(possible) = env.possible_agents() {
        let stray = status.agents.iter().find(|a| !possible.contains(a));
        c.check("possible_agents", stray.map(|a| format!("live agent {a} not in possible_agents")));
    }
    for agent in &status.agents {
        let obs = env.observe(agent);
        let space = env.observation_space(agent);
        let outcome = match (&obs, &space) {
            (Ok(o), Ok(s)) if s.contains(o) => None,
            (Ok(_), Ok(s)) => Some(format!("observation of {agent} outside {s:?}")),
            (Err(e), _) | (_, Err(e)) => Some(format!("observe/observation_space of {agent} failed: {e}")),
        };
        c.check("observation_space", outcome);
        if let (Ok(o), Some(fresh)) = (&obs, env.recompute_observation(agent)) {
            c.check("staleness", (o != &fresh).then(|| format!("observe({agent}) differs from the current state")));
        }
    }
}

fn check_spaces(c: &mut Checker, env: &dyn AecEnv, agents: &[AgentId]) {
    for agent in agents {
        for space in [env.action_space(agent), env.observation_space(agent)] {
            let outcome = match space {
                Ok(s) => s.validate().err().map(|e| format!("{agent}: {e}")),
                Err(e) => Some(format!("{agent}: {e}")),
            };
            c.check("declared_spaces", outcome);
        }
    }
}

/// Attempts a step that must fail and asserts nothing changed.
fn probe_rejection(c: &mut Checker, env: &mut dyn AecEnv, action: Option<Action>, what: &str) {
    let before = env.status().ok().cloned();
    let selected = env.agent_selection();
    let obs_before = selected.as_ref().and_then(|a| env.observe(a).ok());
    let outcome = match env.step(action) {
        Ok(()) => Some(format!("{what} was accepted")),
        Err(_) => {
            let after = env.status().ok().cloned();
            let obs_after = selected.as_ref().and_then(|a| env.observe(a).ok());
            (before != after || obs_before != obs_after).then(|| format!("rejected {what} changed the environment"))
        }
    };
    c.check("action_rejection", outcome);
}

fn run_episode(env: &mut dyn AecEnv, seed: u64, max_steps: usize, c: &mut Checker) -> EpisodeLog {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ POLICY_SALT);
    let mut log = Vec::new();
    env.reset(seed);
    let Ok(initial) = env.status().cloned() else {
        c.check("selection_membership", Some("status unavailable after reset".into()));
        return log;
    };
    check_spaces(c, env, &initial.agents);
    let mut ledger: BTreeMap<AgentId, f64> = initial.agents.iter().map(|a| (a.clone(), 0.0)).collect();
    let mut ever_done: BTreeSet<AgentId> = BTreeSet::new();

    for step in 0..max_steps as u64 {
        c.step = step;
        let status = match env.status() {
            Ok(s) => s.clone(),
            Err(e) => {
                c.check("selection_membership", Some(format!("status failed: {e}")));
                break;
            }
        };
        check_status(c, env, &status);
        let Some(sel) = status.agent_selection.clone() else { break };

        let done = status.is_done(&sel);
        match env.last(false) {
            Ok(last) => {
                let expected = ledger.get(&sel).copied().unwrap_or(0.0);
                let off = (last.cumulative_reward - expected).abs() > LEDGER_TOLERANCE;
                c.check("reward_ledger", off.then(|| {
                    format!("last() reward {} for {sel}, ledger says {expected}", last.cumulative_reward)
                }));
                c.check("done_protocol", (last.done != done).then(|| format!("last() done flag wrong for {sel}")));
            }
            Err(e) => c.check("reward_ledger", Some(format!("last() failed: {e}"))),
        }

        let action = if done || sel.is_env() {
            probe_rejection(c, env, Some(0), &format!("non-null action for {sel}"));
            None
        } else {
            probe_rejection(c, env, None, &format!("null action for live agent {sel}"));
            if let Some(n) = env.action_space(&sel).ok().and_then(|s| s.n()) {
                probe_rejection(c, env, Some(n), &format!("out-of-space action {n} for {sel}"));
            }
            let mut choices = legal_actions(env, &sel).unwrap_or_default();
            if choices.is_empty() {
                choices = (0..env.action_space(&sel).ok().and_then(|s| s.n()).unwrap_or(1)).collect();
            }
            Some(*choices.choose(&mut rng).expect("nonempty choices"))
        };
        let obs_digest = env.observe(&sel).map(|o| digest(&o)).unwrap_or_default();

        if let Err(e) = env.step(action) {
            c.check("action_acceptance", Some(format!("legal step {action:?} by {sel} failed: {e}")));
            break;
        }
        c.check("action_acceptance", None);
        let Ok(after) = env.status().cloned() else { break };

        if done {
            c.check("done_protocol", after.contains(&sel).then(|| format!("{sel} still live after its null step")));
        }
        ever_done.extend(status.dones.iter().filter(|(_, &d)| d).map(|(a, _)| a.clone()));
        let revived = after.agents.iter().find(|a| ever_done.contains(*a) && !after.is_done(a));
        c.check("done_protocol", revived.map(|a| format!("done flag of {a} was cleared")));

        let mut next = BTreeMap::new();
        for agent in &after.agents {
            let r = after.rewards.get(agent).copied().unwrap_or(0.0);
            let base = if *agent == sel { 0.0 } else { ledger.get(agent).copied().unwrap_or(0.0) };
            next.insert(agent.clone(), base + r);
        }
        for (agent, expected) in &next {
            let actual = after.cumulative_rewards.get(agent).copied();
            let off = actual.is_none_or(|a| (a - expected).abs() > LEDGER_TOLERANCE);
            c.check("reward_ledger", off.then(|| format!("cumulative reward of {agent} is {actual:?}, ledger says {expected}")));
        }
        ledger = next;

        log.push((
            Transition {
                t: step,
                agent: sel,
                action,
                rewards_emitted: after.rewards.clone(),
                dones_after: after.dones.clone(),
            },
            obs_digest,
        ));
    }
    log
}

/// Convenience for reporting a construction failure as a report entry.
pub fn construction_failure(env: &str, err: &EnvError) -> ComplianceReport {
    ComplianceReport {
        env: env.to_string(),
        episodes: 0,
        seed: 0,
        checks_run: 1,
        violations: vec![ComplianceViolation {
            check: "construction".into(),
            episode: 0,
            step: 0,
            detail: err.to_string(),
        }],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{make, BUNDLED};

    #[test]
    fn bundled_environments_pass() {
        for name in BUNDLED.iter().filter(|n| **n != "spec") {
            let mut env = make(name, &serde_json::Value::Null).unwrap();
            let report = api_check(&mut env, 2, 7);
            assert!(report.ok(), "{report}");
            assert!(report.checks_run > 0);
        }
    }

    #[test]
    fn report_is_deterministic() {
        let mut env = make("tictactoe", &serde_json::Value::Null).unwrap();
        assert_eq!(api_check(&mut env, 3, 1), api_check(&mut env, 3, 1));
    }
}
