//! Pursuit-evasion on a bounded grid.
//!
//! Each cycle the pursuers move one at a time in acting order, then the `env`
//! agent moves every evader. An evader is captured when each of its four
//! neighbours is outside the grid or holds a pursuer; every adjacent pursuer
//! earns `capture_reward`, and a pursuer may earn it for two evaders at once.
//!
//! * `unpruned`: captures are evaluated after the evaders move and paid on the
//!   env step.
//! * `pruned`: captures are evaluated right after the last pursuer moves and
//!   paid on that step, so rewards never depend on evader randomness.
//!
//! Pursuers never share a cell with each other (a blocked mover stays), and
//! likewise for evaders. A pursuer and an evader may share a cell.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::grid::{Dir, Pos};
use crate::aec::{
    Action, AgentId, EnvError, EnvRng, Game, GlobalState, Info, Observation, Sequential, SpaceSpec,
    StepCtx,
};

pub const STAY: Action = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    Unpruned,
    Pruned,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PursuitConfig {
    pub grid_width: usize,
    pub grid_height: usize,
    pub n_pursuers: usize,
    pub n_evaders: usize,
    pub obs_range: usize,
    pub capture_reward: f64,
    pub reward_mode: RewardMode,
    pub max_cycles: usize,
    /// Pursuer acting order as indices; identity unless stated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<usize>>,
}

impl Default for PursuitConfig {
    fn default() -> Self {
        Self {
            grid_width: 16,
            grid_height: 16,
            n_pursuers: 8,
            n_evaders: 30,
            obs_range: 7,
            capture_reward: 5.0,
            reward_mode: RewardMode::Unpruned,
            max_cycles: 500,
            order: None,
        }
    }
}

impl PursuitConfig {
    /// 8×8 grid, 2 pursuers, 1 evader.
    pub fn small(reward_mode: RewardMode) -> Self {
        Self { grid_width: 8, grid_height: 8, n_pursuers: 2, n_evaders: 1, reward_mode, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: String| Err(EnvError::InvalidConfig(m));
        if self.grid_width == 0 || self.grid_height == 0 {
            return bad("grid dimensions must be positive".into());
        }
        if self.n_pursuers == 0 || self.n_evaders == 0 {
            return bad("need at least one pursuer and one evader".into());
        }
        if self.n_pursuers + self.n_evaders >= self.grid_width * self.grid_height {
            return bad(format!(
                "{} pursuers and {} evaders do not fit a {}x{} grid",
                self.n_pursuers, self.n_evaders, self.grid_width, self.grid_height
            ));
        }
        if self.obs_range.is_multiple_of(2) {
            return bad(format!("obs_range {} must be odd", self.obs_range));
        }
        if self.max_cycles == 0 {
            return bad("max_cycles must be >= 1".into());
        }
        if !self.capture_reward.is_finite() {
            return bad("capture_reward must be finite".into());
        }
        if let Some(order) = &self.order {
            let mut sorted = order.clone();
            sorted.sort_unstable();
            if sorted != (0..self.n_pursuers).collect::<Vec<_>>() {
                return bad(format!("order {order:?} is not a permutation of the pursuers"));
            }
        }
        Ok(())
    }
}

/// One capture: the evader cell and the adjacent pursuers that earned the reward.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capture {
    pub at: Pos,
    pub pursuers: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Pursuit {
    config: PursuitConfig,
    order: Vec<usize>,
    ids: Vec<AgentId>,
    env_id: AgentId,
    pursuers: Vec<Pos>,
    /// `None` once captured.
    evaders: Vec<Option<Pos>>,
    /// Index into `order`; `n_pursuers` means the env moves next.
    cursor: usize,
    cycle: usize,
    last_captures: Vec<Capture>,
    forced: Option<Vec<Action>>,
}

pub type PursuitEnv = Sequential<Pursuit>;

pub fn pursuit_new(config: PursuitConfig) -> Result<PursuitEnv, EnvError> {
    config.validate()?;
    let order = config.order.clone().unwrap_or_else(|| (0..config.n_pursuers).collect());
    Ok(Sequential::new(Pursuit {
        ids: (0..config.n_pursuers).map(|i| AgentId::indexed("pursuer", i)).collect(),
        env_id: AgentId::env(),
        pursuers: Vec::new(),
        evaders: Vec::new(),
        cursor: 0,
        cycle: 0,
        last_captures: Vec::new(),
        forced: None,
        order,
        config,
    }))
}

fn move_target(from: Pos, action: Action) -> Pos {
    Dir::from_index(action).map_or(from, |d| from.step(d))
}

impl Pursuit {
    pub fn config(&self) -> &PursuitConfig {
        &self.config
    }

    pub fn pursuer_positions(&self) -> &[Pos] {
        &self.pursuers
    }

    pub fn evader_positions(&self) -> Vec<Pos> {
        self.evaders.iter().flatten().copied().collect()
    }

    pub fn cycle(&self) -> usize {
        self.cycle
    }

    /// Captures evaluated by the most recent step.
    pub fn last_captures(&self) -> &[Capture] {
        &self.last_captures
    }

    fn in_grid(&self, p: Pos) -> bool {
        p.in_bounds(self.config.grid_width, self.config.grid_height)
    }

    /// Replaces all positions, e.g. to build a scenario after `reset`. Call
    /// [`Sequential::refresh`] afterwards.
    pub fn set_positions(&mut self, pursuers: Vec<Pos>, evaders: Vec<Pos>) -> Result<(), EnvError> {
        if pursuers.len() != self.config.n_pursuers {
            return Err(EnvError::InvalidConfig(format!("expected {} pursuers", self.config.n_pursuers)));
        }
        let distinct = |v: &[Pos]| v.iter().collect::<BTreeSet<_>>().len() == v.len();
        if !distinct(&pursuers) || !distinct(&evaders) {
            return Err(EnvError::InvalidConfig("positions within a team must be distinct".into()));
        }
        if pursuers.iter().chain(&evaders).any(|&p| !self.in_grid(p)) {
            return Err(EnvError::InvalidConfig("position outside the grid".into()));
        }
        self.pursuers = pursuers;
        self.evaders = evaders.into_iter().map(Some).collect();
        Ok(())
    }

    /// Fixes the evaders' moves for the next env step, indexed like the
    /// internal evader list (captured entries are ignored). Off-grid moves stay.
    pub fn force_evader_moves(&mut self, moves: Vec<Action>) {
        self.forced = Some(moves);
    }

    /// In-grid moves (including stay) open to an evader at `from`.
    pub fn evader_options(&self, from: Pos) -> Vec<Action> {
        (0..=STAY).filter(|&a| self.in_grid(move_target(from, a))).collect()
    }

    /// Captures that the current positions would produce, without applying them.
    pub fn pending_captures(&self) -> Vec<Capture> {
        let mut captures = Vec::new();
        for e in self.evaders.iter().flatten().copied() {
            let mut contributors = Vec::new();
            let mut surrounded = true;
            for dir in Dir::ALL {
                let n = e.step(dir);
                if !self.in_grid(n) {
                    continue;
                }
                match self.pursuers.iter().position(|&p| p == n) {
                    Some(i) => contributors.push(i),
                    None => {
                        surrounded = false;
                        break;
                    }
                }
            }
            if surrounded && !contributors.is_empty() {
                captures.push(Capture { at: e, pursuers: contributors });
            }
        }
        captures
    }

    /// Evaluates captures, removes captured evaders and pays contributing pursuers.
    fn resolve_captures(&mut self, ctx: &mut StepCtx<'_>) {
        let captures = self.pending_captures();
        for c in &captures {
            for slot in self.evaders.iter_mut() {
                if *slot == Some(c.at) {
                    *slot = None;
                }
            }
            for &i in &c.pursuers {
                ctx.emit(&self.ids[i], self.config.capture_reward);
            }
        }
        self.last_captures = captures;
    }

    fn move_evaders(&mut self, rng: &mut EnvRng) {
        let forced = self.forced.take();
        let mut order: Vec<usize> = (0..self.evaders.len()).filter(|&i| self.evaders[i].is_some()).collect();
        order.shuffle(rng);
        for i in order {
            let Some(from) = self.evaders[i] else { continue };
            let options = self.evader_options(from);
            let choice = match &forced {
                Some(moves) => moves.get(i).copied().unwrap_or(STAY),
                None => options[rng.gen_range(0..options.len())],
            };
            let target = move_target(from, choice);
            let blocked = !self.in_grid(target)
                || self.evaders.iter().enumerate().any(|(k, e)| k != i && *e == Some(target));
            if !blocked {
                self.evaders[i] = Some(target);
            }
        }
    }

    fn render(&self, center: Option<Pos>) -> Observation {
        let (w, h) = (self.config.grid_width, self.config.grid_height);
        match center {
            None => {
                let mut obs = Observation::zeros(vec![w, h, 3]);
                for p in &self.pursuers {
                    obs.set(&[p.x as usize, p.y as usize, 1], 1.0);
                }
                for e in self.evaders.iter().flatten() {
                    obs.set(&[e.x as usize, e.y as usize, 2], 1.0);
                }
                obs
            }
            Some(c) => {
                let r = self.config.obs_range;
                let half = (r / 2) as i64;
                let mut obs = Observation::zeros(vec![r, r, 3]);
                for dx in -half..=half {
                    for dy in -half..=half {
                        let cell = Pos::new(c.x + dx, c.y + dy);
                        let idx = [(dx + half) as usize, (dy + half) as usize];
                        if !self.in_grid(cell) {
                            obs.set(&[idx[0], idx[1], 0], 1.0);
                            continue;
                        }
                        if self.pursuers.contains(&cell) {
                            obs.set(&[idx[0], idx[1], 1], 1.0);
                        }
                        if self.evaders.contains(&Some(cell)) {
                            obs.set(&[idx[0], idx[1], 2], 1.0);
                        }
                    }
                }
                obs
            }
        }
    }

    fn pursuer_index(&self, agent: &AgentId) -> Option<usize> {
        self.ids.iter().position(|a| a == agent)
    }
}

impl Game for Pursuit {
    fn name(&self) -> &str {
        "pursuit"
    }

    fn reset(&mut self, _seed: u64, rng: &mut EnvRng) -> Vec<AgentId> {
        let (w, h) = (self.config.grid_width as i64, self.config.grid_height as i64);
        let mut cells: Vec<Pos> = (0..w).flat_map(|x| (0..h).map(move |y| Pos::new(x, y))).collect();
        cells.shuffle(rng);
        let np = self.config.n_pursuers;
        self.pursuers = cells[..np].to_vec();
        self.evaders = cells[np..np + self.config.n_evaders].iter().copied().map(Some).collect();
        self.cursor = 0;
        self.cycle = 0;
        self.last_captures.clear();
        self.forced = None;
        let mut agents = self.ids.clone();
        agents.push(self.env_id.clone());
        agents
    }

    fn next_actor(&self) -> AgentId {
        match self.order.get(self.cursor) {
            Some(&i) => self.ids[i].clone(),
            None => self.env_id.clone(),
        }
    }

    fn apply(
        &mut self,
        actor: &AgentId,
        action: Option<Action>,
        ctx: &mut StepCtx<'_>,
    ) -> Result<(), EnvError> {
        self.last_captures.clear();
        if actor.is_env() {
            self.move_evaders(ctx.rng);
            if self.config.reward_mode == RewardMode::Unpruned {
                self.resolve_captures(ctx);
            }
            self.cursor = 0;
            self.cycle += 1;
            if self.cycle >= self.config.max_cycles || self.evaders.iter().all(Option::is_none) {
                ctx.end_episode();
            }
            return Ok(());
        }
        let i = self.pursuer_index(actor).ok_or_else(|| EnvError::UnknownAgent(actor.clone()))?;
        let action = action.ok_or_else(|| EnvError::NullActionForLiveAgent(actor.clone()))?;
        let target = move_target(self.pursuers[i], action);
        if self.in_grid(target) && !self.pursuers.contains(&target) {
            self.pursuers[i] = target;
        }
        self.cursor += 1;
        if self.cursor == self.order.len() && self.config.reward_mode == RewardMode::Pruned {
            self.resolve_captures(ctx);
        }
        Ok(())
    }

    fn observe(&self, agent: &AgentId) -> Observation {
        match self.pursuer_index(agent) {
            Some(i) => self.render(Some(self.pursuers[i])),
            None => Observation::Discrete(0),
        }
    }

    fn state(&self) -> GlobalState {
        GlobalState::Tensor(self.render(None))
    }

    fn action_space(&self, agent: &AgentId) -> Option<SpaceSpec> {
        if agent.is_env() {
            return Some(SpaceSpec::discrete(1));
        }
        self.pursuer_index(agent).map(|_| SpaceSpec::discrete(5))
    }

    fn observation_space(&self, agent: &AgentId) -> Option<SpaceSpec> {
        if agent.is_env() {
            return Some(SpaceSpec::discrete(1));
        }
        let r = self.config.obs_range;
        self.pursuer_index(agent).map(|_| SpaceSpec::unit_box(vec![r, r, 3]))
    }

    fn info(&self, agent: &AgentId) -> Info {
        if agent.is_env() {
            let incidences: usize = self.last_captures.iter().map(|c| c.pursuers.len()).sum();
            return Info::from([
                ("captured_at".to_string(), serde_json::json!(self.last_captures.iter().map(|c| c.at).collect::<Vec<_>>())),
                ("capture_incidences".to_string(), serde_json::json!(incidences)),
                ("evaders_left".to_string(), serde_json::json!(self.evaders.iter().flatten().count())),
            ]);
        }
        match self.pursuer_index(agent) {
            Some(i) => Info::from([("position".to_string(), self.pursuers[i].to_json())]),
            None => Info::new(),
        }
    }

    fn possible_agents(&self) -> Option<Vec<AgentId>> {
        let mut all = self.ids.clone();
        all.push(self.env_id.clone());
        Some(all)
    }

    fn cycle_regular(&self) -> bool {
        true
    }

    fn has_env_agent(&self) -> bool {
        true
    }
}
