//! Well-formedness checks and compilation into dense lookup tables.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::spec::{decode_joint, encode_joint, AecSpec, PosgSpec};
use super::FormalError;

/// Probability rows must sum to one within this tolerance.
pub const SUM_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    BadDimension,
    IndexOutOfRange,
    NegativeProbability,
    NonFinite,
    TransitionRowSum,
    ObservationRowSum,
    RewardRowSum,
    NextAgentRowSum,
    NextAgentDomain,
    AgentTransitionMissing,
    AgentTransitionNotFunction,
    RewardNotInSet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    fn push(&mut self, kind: ViolationKind, detail: impl Into<String>) {
        self.violations.push(Violation { kind, detail: detail.into() });
    }

    fn check_prob(&mut self, p: f64, at: impl Fn() -> String) {
        if !p.is_finite() {
            self.push(ViolationKind::NonFinite, format!("probability {p} at {}", at()));
        } else if p < 0.0 {
            self.push(ViolationKind::NegativeProbability, format!("probability {p} at {}", at()));
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "no violations");
        }
        for v in &self.violations {
            writeln!(f, "{:?}: {}", v.kind, v.detail)?;
        }
        Ok(())
    }
}

fn row_sum_ok(sum: f64) -> bool {
    (sum - 1.0).abs() <= SUM_TOLERANCE
}

/// Dense form of a valid [`PosgSpec`].
#[derive(Clone, Debug)]
pub struct CompiledPosg {
    pub n_states: usize,
    pub n_agents: usize,
    pub initial: usize,
    pub actions: Vec<usize>,
    pub observations: Vec<usize>,
    pub n_joint: usize,
    /// Successor branches indexed by `state * n_joint + joint`.
    pub rows: Vec<Vec<PosgBranch>>,
    /// `[agent][previous action][state]` → sparse `(obs, p)`.
    pub obs_fn: Vec<Vec<Vec<Vec<(usize, f64)>>>>,
}

#[derive(Clone, Debug)]
pub struct PosgBranch {
    pub next: usize,
    pub p: f64,
    /// Reward per agent on this branch.
    pub rewards: Vec<f64>,
}

impl CompiledPosg {
    pub fn row(&self, state: usize, joint: usize) -> &[PosgBranch] {
        &self.rows[state * self.n_joint + joint]
    }

    pub fn decode(&self, joint: usize) -> Vec<usize> {
        decode_joint(&self.actions, joint)
    }
}

/// Dense form of a valid [`AecSpec`]. Actor-indexed vectors use index 0 for the environment.
#[derive(Clone, Debug)]
pub struct CompiledAec {
    pub n_states: usize,
    pub n_agents: usize,
    pub initial: usize,
    pub first_actor: usize,
    /// `|A_j|` per actor, `actions[0] == 1`.
    pub actions: Vec<usize>,
    /// `|Ω_i|` per actor, `observations[0] == 1`.
    pub observations: Vec<usize>,
    /// `[actor][state][action]` → next state; `agent_next[0]` is empty.
    pub agent_next: Vec<Vec<Vec<usize>>>,
    pub env_next: Vec<Vec<(usize, f64)>>,
    /// `[actor][state]` → sparse `(obs, p)`; `obs_fn[0]` is empty.
    pub obs_fn: Vec<Vec<Vec<(usize, f64)>>>,
    /// `[state][actor][action]` → sparse `(next actor, p)`.
    pub nu: Vec<Vec<Vec<Vec<(usize, f64)>>>>,
    rewards: HashMap<(usize, usize, usize, usize, usize), Vec<(f64, f64)>>,
    /// `ℛ_i` per actor (index 0 empty), sorted ascending.
    pub reward_sets: Vec<Vec<f64>>,
}

const ZERO_REWARD: [(f64, f64); 1] = [(0.0, 1.0)];

impl CompiledAec {
    /// Successor states of `actor` taking `action` in `state`.
    pub fn successors(&self, state: usize, actor: usize, action: usize) -> Vec<(usize, f64)> {
        if actor == 0 {
            self.env_next[state].clone()
        } else {
            vec![(self.agent_next[actor][state][action], 1.0)]
        }
    }

    /// Distribution `(value, p)` of agent `agent`'s reward.
    pub fn reward_dist(
        &self,
        agent: usize,
        state: usize,
        actor: usize,
        action: usize,
        next: usize,
    ) -> &[(f64, f64)] {
        self.rewards
            .get(&(agent, state, actor, action, next))
            .map(Vec::as_slice)
            .unwrap_or(&ZERO_REWARD)
    }

    pub fn expected_reward(
        &self,
        agent: usize,
        state: usize,
        actor: usize,
        action: usize,
        next: usize,
    ) -> f64 {
        self.reward_dist(agent, state, actor, action, next).iter().map(|(r, p)| r * p).sum()
    }

    /// True when every reward row is a point mass.
    pub fn has_deterministic_rewards(&self) -> bool {
        self.rewards.values().all(|row| {
            row.iter().filter(|(_, p)| *p > SUM_TOLERANCE).count() <= 1
        })
    }

    /// Every `(state, actor, action, next)` that can occur, in index order.
    pub fn relevant_rows(&self) -> Vec<(usize, usize, usize, usize)> {
        let mut out = Vec::new();
        for s in 0..self.n_states {
            for j in 0..=self.n_agents {
                for a in 0..self.actions[j] {
                    for (s2, p) in self.successors(s, j, a) {
                        if p > 0.0 {
                            out.push((s, j, a, s2));
                        }
                    }
                }
            }
        }
        out
    }
}

pub fn validate_posg(spec: &PosgSpec) -> ValidationReport {
    let mut r = ValidationReport::default();
    let n = spec.num_agents;
    if spec.num_states == 0 {
        r.push(ViolationKind::BadDimension, "num_states must be >= 1");
    }
    if n == 0 {
        r.push(ViolationKind::BadDimension, "num_agents must be >= 1");
    }
    if spec.actions.len() != n || spec.observations.len() != n {
        r.push(
            ViolationKind::BadDimension,
            format!(
                "expected {n} action and observation sizes, got {} and {}",
                spec.actions.len(),
                spec.observations.len()
            ),
        );
        return r;
    }
    if spec.actions.contains(&0) || spec.observations.contains(&0) {
        r.push(ViolationKind::BadDimension, "action and observation sets must be nonempty");
        return r;
    }
    if !r.is_empty() {
        return r;
    }
    let s_count = spec.num_states;
    if spec.initial_state >= s_count {
        r.push(ViolationKind::IndexOutOfRange, format!("initial_state {}", spec.initial_state));
    }
    let joint_ok = |joint: &[usize]| {
        joint.len() == n && joint.iter().zip(&spec.actions).all(|(&a, &m)| a < m)
    };
    let n_joint: usize = spec.actions.iter().product();

    let mut sums = vec![0.0; s_count * n_joint];
    for t in &spec.transitions {
        if t.state >= s_count || t.next >= s_count || !joint_ok(&t.joint) {
            r.push(ViolationKind::IndexOutOfRange, format!("transition {t:?}"));
            continue;
        }
        r.check_prob(t.p, || format!("transition {t:?}"));
        sums[t.state * n_joint + encode_joint(&spec.actions, &t.joint)] += t.p;
    }
    for s in 0..s_count {
        for j in 0..n_joint {
            let sum = sums[s * n_joint + j];
            if !row_sum_ok(sum) {
                r.push(
                    ViolationKind::TransitionRowSum,
                    format!(
                        "P(s={s}, joint={:?}, ·) sums to {sum}",
                        decode_joint(&spec.actions, j)
                    ),
                );
            }
        }
    }
    for w in &spec.rewards {
        if w.agent >= n || w.state >= s_count || w.next >= s_count || !joint_ok(&w.joint) {
            r.push(ViolationKind::IndexOutOfRange, format!("reward {w:?}"));
        } else if !w.value.is_finite() {
            r.push(ViolationKind::NonFinite, format!("reward {w:?}"));
        }
    }
    let mut obs_sums: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
    for o in &spec.observation_fn {
        if o.agent >= n
            || o.action >= spec.actions[o.agent]
            || o.state >= s_count
            || o.obs >= spec.observations[o.agent]
        {
            r.push(ViolationKind::IndexOutOfRange, format!("observation {o:?}"));
            continue;
        }
        r.check_prob(o.p, || format!("observation {o:?}"));
        *obs_sums.entry((o.agent, o.action, o.state)).or_insert(0.0) += o.p;
    }
    for i in 0..n {
        for a in 0..spec.actions[i] {
            for s in 0..s_count {
                let sum = obs_sums.get(&(i, a, s)).copied().unwrap_or(0.0);
                if !row_sum_ok(sum) {
                    r.push(
                        ViolationKind::ObservationRowSum,
                        format!("O_{i}(a={a}, s={s}, ·) sums to {sum}"),
                    );
                }
            }
        }
    }
    r
}

/// Validates, then builds the dense tables.
pub fn compile_posg(spec: &PosgSpec) -> Result<CompiledPosg, FormalError> {
    let report = validate_posg(spec);
    if !report.is_empty() {
        return Err(FormalError::InvalidSpec(report));
    }
    let n = spec.num_agents;
    let n_joint: usize = spec.actions.iter().product();
    let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); spec.num_states * n_joint];
    for t in &spec.transitions {
        let key = t.state * n_joint + encode_joint(&spec.actions, &t.joint);
        *rows[key].entry(t.next).or_insert(0.0) += t.p;
    }
    let mut reward_table: HashMap<(usize, usize, usize, usize), f64> = HashMap::new();
    for w in &spec.rewards {
        let j = encode_joint(&spec.actions, &w.joint);
        *reward_table.entry((w.agent, w.state, j, w.next)).or_insert(0.0) += w.value;
    }
    let rows = rows
        .into_iter()
        .enumerate()
        .map(|(key, row)| {
            let (s, j) = (key / n_joint, key % n_joint);
            row.into_iter()
                .filter(|&(_, p)| p > 0.0)
                .map(|(next, p)| PosgBranch {
                    next,
                    p,
                    rewards: (0..n)
                        .map(|i| reward_table.get(&(i, s, j, next)).copied().unwrap_or(0.0))
                        .collect(),
                })
                .collect()
        })
        .collect();
    let mut obs_fn: Vec<Vec<Vec<BTreeMap<usize, f64>>>> = (0..n)
        .map(|i| vec![vec![BTreeMap::new(); spec.num_states]; spec.actions[i]])
        .collect();
    for o in &spec.observation_fn {
        *obs_fn[o.agent][o.action][o.state].entry(o.obs).or_insert(0.0) += o.p;
    }
    Ok(CompiledPosg {
        n_states: spec.num_states,
        n_agents: n,
        initial: spec.initial_state,
        actions: spec.actions.clone(),
        observations: spec.observations.clone(),
        n_joint,
        rows,
        obs_fn: obs_fn
            .into_iter()
            .map(|per_a| {
                per_a
                    .into_iter()
                    .map(|per_s| {
                        per_s
                            .into_iter()
                            .map(|m| m.into_iter().filter(|&(_, p)| p > 0.0).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect(),
    })
}

pub fn validate_aec(spec: &AecSpec) -> ValidationReport {
    check_aec(spec).0
}

pub fn compile_aec(spec: &AecSpec) -> Result<CompiledAec, FormalError> {
    let (report, compiled) = check_aec(spec);
    match compiled {
        Some(c) if report.is_empty() => Ok(c),
        _ => Err(FormalError::InvalidSpec(report)),
    }
}

fn sorted_dedup(mut values: Vec<f64>) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    values.dedup();
    values
}

fn check_aec(spec: &AecSpec) -> (ValidationReport, Option<CompiledAec>) {
    let mut r = ValidationReport::default();
    let n = spec.num_agents;
    let s_count = spec.num_states;
    if s_count == 0 {
        r.push(ViolationKind::BadDimension, "num_states must be >= 1");
    }
    if n == 0 {
        r.push(ViolationKind::BadDimension, "num_agents must be >= 1");
    }
    if spec.actions.len() != n || spec.observations.len() != n {
        r.push(
            ViolationKind::BadDimension,
            format!(
                "expected {n} action and observation sizes, got {} and {}",
                spec.actions.len(),
                spec.observations.len()
            ),
        );
    }
    if spec.actions.contains(&0) || spec.observations.contains(&0) {
        r.push(ViolationKind::BadDimension, "action and observation sets must be nonempty");
    }
    if let Some(sets) = &spec.reward_sets {
        if sets.len() != n {
            r.push(ViolationKind::BadDimension, format!("expected {n} reward sets"));
        }
    }
    if !r.is_empty() {
        return (r, None);
    }
    if spec.initial_state >= s_count {
        r.push(ViolationKind::IndexOutOfRange, format!("initial_state {}", spec.initial_state));
    }
    if spec.first_actor > n {
        r.push(ViolationKind::IndexOutOfRange, format!("first_actor {}", spec.first_actor));
    }
    let actions: Vec<usize> = std::iter::once(1).chain(spec.actions.iter().copied()).collect();
    let observations: Vec<usize> =
        std::iter::once(1).chain(spec.observations.iter().copied()).collect();

    // Agent transitions: total and function-valued.
    let mut agent_next: Vec<Vec<Vec<Option<usize>>>> = (0..=n)
        .map(|j| if j == 0 { Vec::new() } else { vec![vec![None; actions[j]]; s_count] })
        .collect();
    for t in &spec.agent_transitions {
        if t.agent == 0 || t.agent > n || t.state >= s_count || t.next >= s_count {
            r.push(ViolationKind::IndexOutOfRange, format!("agent transition {t:?}"));
            continue;
        }
        if t.action >= actions[t.agent] {
            r.push(ViolationKind::IndexOutOfRange, format!("agent transition {t:?}"));
            continue;
        }
        let slot = &mut agent_next[t.agent][t.state][t.action];
        match slot {
            Some(prev) if *prev != t.next => r.push(
                ViolationKind::AgentTransitionNotFunction,
                format!("T_{}(s={}, a={}) maps to both {} and {}", t.agent, t.state, t.action, prev, t.next),
            ),
            _ => *slot = Some(t.next),
        }
    }
    for (j, per_agent) in agent_next.iter().enumerate().skip(1) {
        for (s, per_state) in per_agent.iter().enumerate() {
            for (a, next) in per_state.iter().enumerate() {
                if next.is_none() {
                    r.push(
                        ViolationKind::AgentTransitionMissing,
                        format!("T_{j}(s={s}, a={a}) undefined"),
                    );
                }
            }
        }
    }

    let mut env_rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); s_count];
    for t in &spec.env_transitions {
        if t.state >= s_count || t.next >= s_count {
            r.push(ViolationKind::IndexOutOfRange, format!("env transition {t:?}"));
            continue;
        }
        r.check_prob(t.p, || format!("env transition {t:?}"));
        *env_rows[t.state].entry(t.next).or_insert(0.0) += t.p;
    }
    for (s, row) in env_rows.iter().enumerate() {
        let sum: f64 = row.values().sum();
        if !row_sum_ok(sum) {
            r.push(ViolationKind::TransitionRowSum, format!("P(s={s}, ·) sums to {sum}"));
        }
    }

    let mut obs_rows: Vec<Vec<BTreeMap<usize, f64>>> = (0..=n)
        .map(|j| if j == 0 { Vec::new() } else { vec![BTreeMap::new(); s_count] })
        .collect();
    for o in &spec.observation_fn {
        if o.agent == 0 || o.agent > n || o.state >= s_count || o.obs >= observations[o.agent] {
            r.push(ViolationKind::IndexOutOfRange, format!("observation {o:?}"));
            continue;
        }
        r.check_prob(o.p, || format!("observation {o:?}"));
        *obs_rows[o.agent][o.state].entry(o.obs).or_insert(0.0) += o.p;
    }
    for (i, per_agent) in obs_rows.iter().enumerate().skip(1) {
        for (s, row) in per_agent.iter().enumerate() {
            let sum: f64 = row.values().sum();
            if !row_sum_ok(sum) {
                r.push(ViolationKind::ObservationRowSum, format!("O_{i}(s={s}, ·) sums to {sum}"));
            }
        }
    }

    let mut nu: Vec<Vec<Vec<BTreeMap<usize, f64>>>> = (0..s_count)
        .map(|_| (0..=n).map(|j| vec![BTreeMap::new(); actions[j]]).collect())
        .collect();
    for e in &spec.next_agent {
        if e.state >= s_count || e.actor > n || e.next > n {
            r.push(ViolationKind::IndexOutOfRange, format!("next agent {e:?}"));
            continue;
        }
        r.check_prob(e.p, || format!("next agent {e:?}"));
        if e.action >= actions[e.actor] {
            if e.p > 0.0 {
                r.push(
                    ViolationKind::NextAgentDomain,
                    format!(
                        "ν(s={}, actor={}, a={}, next={}) = {} but a is not an action of {}",
                        e.state, e.actor, e.action, e.next, e.p, e.actor
                    ),
                );
            }
            continue;
        }
        *nu[e.state][e.actor][e.action].entry(e.next).or_insert(0.0) += e.p;
    }
    for (s, per_state) in nu.iter().enumerate() {
        for (j, per_actor) in per_state.iter().enumerate() {
            for (a, row) in per_actor.iter().enumerate() {
                let sum: f64 = row.values().sum();
                if !row_sum_ok(sum) {
                    r.push(
                        ViolationKind::NextAgentRowSum,
                        format!("ν(s={s}, actor={j}, a={a}, ·) sums to {sum}"),
                    );
                }
            }
        }
    }

    let mut reward_rows: HashMap<(usize, usize, usize, usize, usize), BTreeMap<u64, (f64, f64)>> =
        HashMap::new();
    for w in &spec.rewards {
        if w.agent == 0
            || w.agent > n
            || w.state >= s_count
            || w.actor > n
            || w.next >= s_count
            || w.action >= actions[w.actor]
        {
            r.push(ViolationKind::IndexOutOfRange, format!("reward {w:?}"));
            continue;
        }
        if !w.value.is_finite() {
            r.push(ViolationKind::NonFinite, format!("reward {w:?}"));
            continue;
        }
        r.check_prob(w.p, || format!("reward {w:?}"));
        if let Some(sets) = &spec.reward_sets {
            if !sets[w.agent - 1].contains(&w.value) {
                r.push(ViolationKind::RewardNotInSet, format!("reward {w:?}"));
            }
        }
        let entry = reward_rows
            .entry((w.agent, w.state, w.actor, w.action, w.next))
            .or_default()
            .entry(w.value.to_bits())
            .or_insert((w.value, 0.0));
        entry.1 += w.p;
    }
    for (key, row) in &reward_rows {
        let sum: f64 = row.values().map(|(_, p)| p).sum();
        if !row_sum_ok(sum) {
            r.push(
                ViolationKind::RewardRowSum,
                format!(
                    "R_{}(s={}, actor={}, a={}, s'={}, ·) sums to {sum}",
                    key.0, key.1, key.2, key.3, key.4
                ),
            );
        }
    }
    if !r.is_empty() {
        return (r, None);
    }

    let mut compiled = CompiledAec {
        n_states: s_count,
        n_agents: n,
        initial: spec.initial_state,
        first_actor: spec.first_actor,
        actions,
        observations,
        agent_next: agent_next
            .into_iter()
            .map(|per_agent| {
                per_agent
                    .into_iter()
                    .map(|per_state| per_state.into_iter().map(Option::unwrap).collect())
                    .collect()
            })
            .collect(),
        env_next: env_rows
            .into_iter()
            .map(|row| row.into_iter().filter(|&(_, p)| p > 0.0).collect())
            .collect(),
        obs_fn: obs_rows
            .into_iter()
            .map(|per_agent| {
                per_agent
                    .into_iter()
                    .map(|row| row.into_iter().filter(|&(_, p)| p > 0.0).collect())
                    .collect()
            })
            .collect(),
        nu: nu
            .into_iter()
            .map(|per_state| {
                per_state
                    .into_iter()
                    .map(|per_actor| {
                        per_actor
                            .into_iter()
                            .map(|row| row.into_iter().filter(|&(_, p)| p > 0.0).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect(),
        rewards: reward_rows
            .into_iter()
            .map(|(k, row)| {
                let mut row: Vec<(f64, f64)> =
                    row.into_values().filter(|&(_, p)| p > 0.0).collect();
                row.sort_by(|a, b| a.0.total_cmp(&b.0));
                (k, row)
            })
            .collect(),
        reward_sets: Vec::new(),
    };

    // Reward sets: declared, or the support plus 0 wherever a relevant row is implicit.
    let relevant = compiled.relevant_rows();
    let mut sets = vec![Vec::new(); n + 1];
    for (i, set) in sets.iter_mut().enumerate().skip(1) {
        match &spec.reward_sets {
            Some(declared) => *set = sorted_dedup(declared[i - 1].clone()),
            None => {
                let mut values: Vec<f64> = Vec::new();
                for &(s, j, a, s2) in &relevant {
                    let dist = compiled.reward_dist(i, s, j, a, s2);
                    values.extend(dist.iter().map(|(v, _)| *v));
                }
                *set = sorted_dedup(values);
            }
        }
    }
    if spec.reward_sets.is_some() {
        for &(s, j, a, s2) in &relevant {
            for (i, set) in sets.iter().enumerate().skip(1) {
                if !compiled.rewards.contains_key(&(i, s, j, a, s2)) && !set.contains(&0.0) {
                    r.push(
                        ViolationKind::RewardNotInSet,
                        format!("implicit reward 0 for agent {i} at (s={s}, actor={j}, a={a}, s'={s2}) not in its declared set"),
                    );
                }
            }
        }
    }
    compiled.reward_sets = sets;
    let ok = r.is_empty();
    (r, ok.then_some(compiled))
}
