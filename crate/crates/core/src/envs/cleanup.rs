//! The river-cleaning gridworld with its three-beam cleaning action.
//!
//! Tiles are empty land, clean river, river with waste, or apples. Agents walk
//! on land only. Action `5` fires three parallel beams in the facing
//! direction: the main beam from the tile in front, and two auxiliary beams
//! from the tiles to the agent's left and right. Each beam covers at most
//! `beam_length` tiles, passes over everything except waste, cleans the first
//! waste tile it reaches and stops there, and is cut off by the border.
//!
//! * `aec`: every action resolves when its agent steps; the `env` step only
//!   regrows apples.
//! * `parallel_buggy`: agents choose against the board as it stood at the
//!   start of the cycle, and the `env` step resolves every queued action in
//!   label order. This reproduces order-dependent tie-breaking.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::grid::{Dir, Pos};
use crate::aec::{
    Action, AgentId, EnvError, EnvRng, Game, GlobalState, Info, Observation, Sequential, SpaceSpec,
    StepCtx,
};

pub const STAY: Action = 4;
pub const CLEAN: Action = 5;

/// The two-agent board with waste at (6,3) and (6,6), shipped as a scenario file.
pub const FIG5_SCENARIO_JSON: &str = include_str!("../../../../scenarios/cleanup_fig5.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteppingMode {
    Aec,
    ParallelBuggy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tile {
    Empty,
    RiverClean,
    RiverWaste,
    Apple,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentStart {
    pub pos: Pos,
    pub orientation: Dir,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CleanupConfig {
    pub width: usize,
    pub height: usize,
    /// Clean river tiles.
    #[serde(default)]
    pub river: Vec<Pos>,
    /// River tiles holding waste.
    #[serde(default)]
    pub waste: Vec<Pos>,
    #[serde(default)]
    pub apples: Vec<Pos>,
    pub agent_starts: Vec<AgentStart>,
    #[serde(default = "default_beam_length")]
    pub beam_length: usize,
    #[serde(default = "default_mode")]
    pub stepping_mode: SteppingMode,
    #[serde(default)]
    pub apple_spawn_prob: f64,
    #[serde(default = "default_max_cycles")]
    pub max_cycles: usize,
}

fn default_beam_length() -> usize {
    5
}
fn default_mode() -> SteppingMode {
    SteppingMode::Aec
}
fn default_max_cycles() -> usize {
    100
}

/// A board plus a fixed action script per start (indexed like `agent_starts`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CleanupScenario {
    pub config: CleanupConfig,
    #[serde(default)]
    pub script: Vec<Vec<Action>>,
}

impl CleanupScenario {
    pub fn fig5() -> Self {
        serde_json::from_str(FIG5_SCENARIO_JSON).expect("bundled scenario parses")
    }

    pub fn with_mode(mut self, mode: SteppingMode) -> Self {
        self.config.stepping_mode = mode;
        self
    }

    /// Reassigns labels: label `k` gets start and script `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        out.config.agent_starts = perm.iter().map(|&i| self.config.agent_starts[i]).collect();
        if !self.script.is_empty() {
            out.script = perm.iter().map(|&i| self.script[i].clone()).collect();
        }
        out
    }
}

impl CleanupConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: String| Err(EnvError::InvalidConfig(m));
        if self.width == 0 || self.height == 0 {
            return bad("board dimensions must be positive".into());
        }
        if self.agent_starts.is_empty() {
            return bad("need at least one agent".into());
        }
        if self.beam_length == 0 {
            return bad("beam_length must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.apple_spawn_prob) {
            return bad(format!("apple_spawn_prob {} outside [0, 1]", self.apple_spawn_prob));
        }
        if self.max_cycles == 0 {
            return bad("max_cycles must be >= 1".into());
        }
        let inside = |p: &Pos| p.in_bounds(self.width, self.height);
        if let Some(p) = self.river.iter().chain(&self.waste).chain(&self.apples).find(|p| !inside(p)) {
            return bad(format!("tile {p:?} outside the board"));
        }
        let starts: BTreeSet<Pos> = self.agent_starts.iter().map(|s| s.pos).collect();
        if starts.len() != self.agent_starts.len() {
            return bad("agent starts must be distinct".into());
        }
        for s in &self.agent_starts {
            if !inside(&s.pos) {
                return bad(format!("agent start {:?} outside the board", s.pos));
            }
            if self.river.contains(&s.pos) || self.waste.contains(&s.pos) {
                return bad(format!("agent start {:?} is in the river", s.pos));
            }
        }
        Ok(())
    }
}

/// Tiles covered by each beam (main, left, right) and the waste they cleaned.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeamResult {
    pub main: Vec<Pos>,
    pub left: Vec<Pos>,
    pub right: Vec<Pos>,
    pub waste_cleaned: BTreeSet<Pos>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Body {
    pos: Pos,
    facing: Dir,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Board {
    tiles: Vec<Tile>,
    bodies: Vec<Body>,
}

#[derive(Clone, Debug)]
pub struct Cleanup {
    config: CleanupConfig,
    ids: Vec<AgentId>,
    env_id: AgentId,
    board: Board,
    /// Cycle-start board seen by agents in `parallel_buggy` mode.
    snapshot: Board,
    queued: Vec<Option<Action>>,
    cursor: usize,
    cycle: usize,
    stale: Vec<bool>,
    last_beam: Vec<Option<BeamResult>>,
    cleaned_total: usize,
}

pub type CleanupEnv = Sequential<Cleanup>;

pub fn cleanup_new(config: CleanupConfig) -> Result<CleanupEnv, EnvError> {
    config.validate()?;
    let k = config.agent_starts.len();
    let board = initial_board(&config);
    Ok(Sequential::new(Cleanup {
        ids: (0..k).map(|i| AgentId::indexed("agent", i)).collect(),
        env_id: AgentId::env(),
        snapshot: board.clone(),
        board,
        queued: vec![None; k],
        cursor: 0,
        cycle: 0,
        stale: vec![false; k],
        last_beam: vec![None; k],
        cleaned_total: 0,
        config,
    }))
}

fn initial_board(config: &CleanupConfig) -> Board {
    let mut tiles = vec![Tile::Empty; config.width * config.height];
    let idx = |p: &Pos| p.x as usize * config.height + p.y as usize;
    for p in &config.river {
        tiles[idx(p)] = Tile::RiverClean;
    }
    for p in &config.waste {
        tiles[idx(p)] = Tile::RiverWaste;
    }
    for p in &config.apples {
        tiles[idx(p)] = Tile::Apple;
    }
    let bodies = config.agent_starts.iter().map(|s| Body { pos: s.pos, facing: s.orientation }).collect();
    Board { tiles, bodies }
}

impl Board {
    fn idx(&self, height: usize, p: Pos) -> usize {
        p.x as usize * height + p.y as usize
    }
}

impl Cleanup {
    pub fn config(&self) -> &CleanupConfig {
        &self.config
    }

    fn inside(&self, p: Pos) -> bool {
        p.in_bounds(self.config.width, self.config.height)
    }

    pub fn tile(&self, p: Pos) -> Tile {
        self.board.tiles[self.board.idx(self.config.height, p)]
    }

    pub fn waste_tiles(&self) -> Vec<Pos> {
        self.positions_of(Tile::RiverWaste)
    }

    fn positions_of(&self, kind: Tile) -> Vec<Pos> {
        let h = self.config.height as i64;
        (0..self.config.width as i64)
            .flat_map(|x| (0..h).map(move |y| Pos::new(x, y)))
            .filter(|&p| self.tile(p) == kind)
            .collect()
    }

    pub fn cleaned_total(&self) -> usize {
        self.cleaned_total
    }

    pub fn position(&self, agent: usize) -> Pos {
        self.board.bodies[agent].pos
    }

    pub fn last_beam(&self, agent: usize) -> Option<&BeamResult> {
        self.last_beam[agent].as_ref()
    }

    fn label(&self, agent: &AgentId) -> Option<usize> {
        self.ids.iter().position(|a| a == agent)
    }

    /// Fires the three beams of agent `i` against the live board.
    fn fire(&mut self, i: usize) -> BeamResult {
        let Body { pos, facing } = self.board.bodies[i];
        let mut result = BeamResult::default();
        let starts = [pos.step(facing), pos.step(facing.left()), pos.step(facing.right())];
        for (beam, start) in starts.into_iter().enumerate() {
            let mut covered = Vec::new();
            for k in 0..self.config.beam_length as i64 {
                let tile_pos = start.offset(facing, k);
                if !self.inside(tile_pos) {
                    break;
                }
                covered.push(tile_pos);
                let at = self.board.idx(self.config.height, tile_pos);
                if self.board.tiles[at] == Tile::RiverWaste {
                    self.board.tiles[at] = Tile::RiverClean;
                    result.waste_cleaned.insert(tile_pos);
                    break;
                }
            }
            match beam {
                0 => result.main = covered,
                1 => result.left = covered,
                _ => result.right = covered,
            }
        }
        result
    }

    fn resolve(&mut self, i: usize, action: Action, ctx: &mut StepCtx<'_>) {
        if action == CLEAN {
            let beam = self.fire(i);
            self.cleaned_total += beam.waste_cleaned.len();
            self.last_beam[i] = Some(beam);
            return;
        }
        let Some(dir) = Dir::from_index(action) else { return };
        self.board.bodies[i].facing = dir;
        let target = self.board.bodies[i].pos.step(dir);
        if !self.inside(target) || self.board.bodies.iter().any(|b| b.pos == target) {
            return;
        }
        let at = self.board.idx(self.config.height, target);
        match self.board.tiles[at] {
            Tile::Empty => self.board.bodies[i].pos = target,
            Tile::Apple => {
                self.board.tiles[at] = Tile::Empty;
                self.board.bodies[i].pos = target;
                ctx.emit(&self.ids[i], 1.0);
            }
            Tile::RiverClean | Tile::RiverWaste => {}
        }
    }

    fn regrow(&mut self, rng: &mut EnvRng) {
        if self.config.apple_spawn_prob <= 0.0 {
            return;
        }
        for x in 0..self.config.width as i64 {
            for y in 0..self.config.height as i64 {
                let p = Pos::new(x, y);
                let at = self.board.idx(self.config.height, p);
                let occupied = self.board.bodies.iter().any(|b| b.pos == p);
                if self.board.tiles[at] == Tile::Empty
                    && rng.gen_bool(self.config.apple_spawn_prob)
                    && !occupied
                {
                    self.board.tiles[at] = Tile::Apple;
                }
            }
        }
    }

    fn render(&self, board: &Board, viewer: Option<usize>) -> Observation {
        let (w, h) = (self.config.width, self.config.height);
        let planes = if viewer.is_some() { 5 } else { 4 };
        let mut obs = Observation::zeros(vec![w, h, planes]);
        for x in 0..w {
            for y in 0..h {
                let plane = match board.tiles[x * h + y] {
                    Tile::RiverClean => Some(0),
                    Tile::RiverWaste => Some(1),
                    Tile::Apple => Some(2),
                    Tile::Empty => None,
                };
                if let Some(c) = plane {
                    obs.set(&[x, y, c], 1.0);
                }
            }
        }
        for (k, b) in board.bodies.iter().enumerate() {
            let plane = match viewer {
                Some(v) if v == k => 3,
                Some(_) => 4,
                None => 3,
            };
            obs.set(&[b.pos.x as usize, b.pos.y as usize, plane], 1.0);
        }
        obs
    }
}

impl Game for Cleanup {
    fn name(&self) -> &str {
        "cleanup"
    }

    fn reset(&mut self, _seed: u64, _rng: &mut EnvRng) -> Vec<AgentId> {
        self.board = initial_board(&self.config);
        self.snapshot = self.board.clone();
        self.queued.iter_mut().for_each(|q| *q = None);
        self.stale.iter_mut().for_each(|s| *s = false);
        self.last_beam.iter_mut().for_each(|b| *b = None);
        self.cursor = 0;
        self.cycle = 0;
        self.cleaned_total = 0;
        let mut agents = self.ids.clone();
        agents.push(self.env_id.clone());
        agents
    }

    fn next_actor(&self) -> AgentId {
        self.ids.get(self.cursor).unwrap_or(&self.env_id).clone()
    }

    fn apply(
        &mut self,
        actor: &AgentId,
        action: Option<Action>,
        ctx: &mut StepCtx<'_>,
    ) -> Result<(), EnvError> {
        if actor.is_env() {
            if self.config.stepping_mode == SteppingMode::ParallelBuggy {
                for i in 0..self.ids.len() {
                    if let Some(a) = self.queued[i].take() {
                        self.stale[i] = self.board != self.snapshot;
                        self.resolve(i, a, ctx);
                    }
                }
            }
            self.regrow(ctx.rng);
            self.snapshot = self.board.clone();
            self.cursor = 0;
            self.cycle += 1;
            if self.cycle >= self.config.max_cycles {
                ctx.end_episode();
            }
            return Ok(());
        }
        let i = self.label(actor).ok_or_else(|| EnvError::UnknownAgent(actor.clone()))?;
        let action = action.ok_or_else(|| EnvError::NullActionForLiveAgent(actor.clone()))?;
        match self.config.stepping_mode {
            SteppingMode::Aec => self.resolve(i, action, ctx),
            SteppingMode::ParallelBuggy => self.queued[i] = Some(action),
        }
        self.cursor += 1;
        Ok(())
    }

    fn observe(&self, agent: &AgentId) -> Observation {
        let Some(i) = self.label(agent) else { return Observation::Discrete(0) };
        match self.config.stepping_mode {
            SteppingMode::Aec => self.render(&self.board, Some(i)),
            SteppingMode::ParallelBuggy => self.render(&self.snapshot, Some(i)),
        }
    }

    fn recompute_observation(&self, agent: &AgentId) -> Option<Observation> {
        match self.label(agent) {
            Some(i) => Some(self.render(&self.board, Some(i))),
            None => Some(Observation::Discrete(0)),
        }
    }

    fn state(&self) -> GlobalState {
        GlobalState::Tensor(self.render(&self.board, None))
    }

    fn action_space(&self, agent: &AgentId) -> Option<SpaceSpec> {
        if agent.is_env() {
            return Some(SpaceSpec::discrete(1));
        }
        self.label(agent).map(|_| SpaceSpec::discrete(6))
    }

    fn observation_space(&self, agent: &AgentId) -> Option<SpaceSpec> {
        if agent.is_env() {
            return Some(SpaceSpec::discrete(1));
        }
        self.label(agent).map(|_| SpaceSpec::unit_box(vec![self.config.width, self.config.height, 5]))
    }

    fn info(&self, agent: &AgentId) -> Info {
        if agent.is_env() {
            return Info::from([("cleaned_total".to_string(), serde_json::json!(self.cleaned_total))]);
        }
        let Some(i) = self.label(agent) else { return Info::new() };
        let body = self.board.bodies[i];
        Info::from([
            ("position".to_string(), body.pos.to_json()),
            ("orientation".to_string(), serde_json::json!(body.facing)),
            ("stale_resolution".to_string(), serde_json::json!(self.stale[i])),
        ])
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aec::AecEnv;

    fn run_cycle(env: &mut CleanupEnv, actions: &[Action]) {
        for &a in actions {
            env.step(Some(a)).unwrap();
        }
        env.step(None).unwrap();
    }

    fn fig5(mode: SteppingMode, perm: &[usize]) -> CleanupEnv {
        let mut config = CleanupScenario::fig5().with_mode(mode).permuted(perm).config;
        config.max_cycles = 4;
        let mut env = cleanup_new(config).unwrap();
        env.reset(0);
        env
    }

    #[test]
    fn fig5_board_matches_scenario() {
        let env = fig5(SteppingMode::Aec, &[0, 1]);
        assert_eq!(env.game().waste_tiles(), vec![Pos::new(6, 3), Pos::new(6, 6)]);
        assert_eq!(env.game().position(0), Pos::new(4, 3));
        let GlobalState::Tensor(state) = env.state() else { panic!() };
        assert_eq!(state.at(&[6, 3, 1]), 1.0);
        assert_eq!(state.at(&[6, 6, 1]), 1.0);
    }

    #[test]
    fn label_order_decides_cleaned_count_in_parallel_buggy_mode() {
        let mut near_first = fig5(SteppingMode::ParallelBuggy, &[0, 1]);
        run_cycle(&mut near_first, &[CLEAN, CLEAN]);
        assert_eq!(near_first.game().cleaned_total(), 2);

        let mut far_first = fig5(SteppingMode::ParallelBuggy, &[1, 0]);
        run_cycle(&mut far_first, &[CLEAN, CLEAN]);
        assert_eq!(far_first.game().cleaned_total(), 1);
        assert_eq!(far_first.game().waste_tiles(), vec![Pos::new(6, 6)]);
    }

    #[test]
    fn beam_footprint_of_both_agents() {
        let mut env = fig5(SteppingMode::Aec, &[0, 1]);
        run_cycle(&mut env, &[CLEAN, CLEAN]);
        let a = env.game().last_beam(0).unwrap();
        assert_eq!(a.main, vec![Pos::new(5, 3), Pos::new(6, 3)]);
        assert_eq!(a.left, (4..9).map(|x| Pos::new(x, 4)).collect::<Vec<_>>());
        assert_eq!(a.right, (4..9).map(|x| Pos::new(x, 2)).collect::<Vec<_>>());
        let b = env.game().last_beam(1).unwrap();
        assert_eq!(b.main, (2..7).map(|y| Pos::new(6, y)).collect::<Vec<_>>());
        assert_eq!(b.left, (1..6).map(|y| Pos::new(5, y)).collect::<Vec<_>>());
        assert_eq!(b.right, (1..6).map(|y| Pos::new(7, y)).collect::<Vec<_>>());
        let s = env.status().unwrap();
        assert!(s.cumulative_rewards.values().all(|&r| r == 0.0));
    }

    #[test]
    fn unobstructed_beams_run_full_length() {
        let config = CleanupConfig {
            width: 13,
            height: 9,
            river: vec![Pos::new(6, 4), Pos::new(7, 5)],
            waste: vec![],
            apples: vec![],
            agent_starts: vec![AgentStart { pos: Pos::new(4, 4), orientation: Dir::East }],
            beam_length: 5,
            stepping_mode: SteppingMode::Aec,
            apple_spawn_prob: 0.0,
            max_cycles: 3,
        };
        let mut env = cleanup_new(config).unwrap();
        env.reset(0);
        run_cycle(&mut env, &[CLEAN]);
        let beam = env.game().last_beam(0).unwrap();
        assert_eq!([beam.main.len(), beam.left.len(), beam.right.len()], [5, 5, 5]);
        assert!(beam.waste_cleaned.is_empty());
        assert_eq!(beam.main.last(), Some(&Pos::new(9, 4)));
    }

    #[test]
    fn beams_truncate_at_the_border() {
        let config = CleanupConfig {
            width: 4,
            height: 3,
            river: vec![],
            waste: vec![],
            apples: vec![],
            agent_starts: vec![AgentStart { pos: Pos::new(1, 2), orientation: Dir::East }],
            beam_length: 5,
            stepping_mode: SteppingMode::Aec,
            apple_spawn_prob: 0.0,
            max_cycles: 1,
        };
        let mut env = cleanup_new(config).unwrap();
        env.reset(0);
        env.step(Some(CLEAN)).unwrap();
        let beam = env.game().last_beam(0).unwrap();
        assert_eq!(beam.main.len(), 2);
        assert!(beam.left.is_empty(), "left of East is North, off the board");
        assert_eq!(beam.right.len(), 3);
    }

    #[test]
    fn aec_observation_reflects_earlier_cleaning() {
        let mut env = fig5(SteppingMode::Aec, &[0, 1]);
        env.step(Some(CLEAN)).unwrap();
        let obs = env.observe(&AgentId::indexed("agent", 1)).unwrap();
        assert_eq!(obs.at(&[6, 3, 0]), 1.0);
        assert_eq!(obs.at(&[6, 3, 1]), 0.0);
    }

    #[test]
    fn parallel_buggy_observation_is_cycle_start_snapshot() {
        let mut env = fig5(SteppingMode::ParallelBuggy, &[0, 1]);
        run_cycle(&mut env, &[CLEAN, STAY]);
        let b = AgentId::indexed("agent", 1);
        assert_eq!(env.observe(&b).unwrap().at(&[6, 3, 1]), 0.0);
        // Queued but unresolved until the env step.
        env.step(Some(STAY)).unwrap();
        env.step(Some(CLEAN)).unwrap();
        assert_eq!(env.game().cleaned_total(), 1);
        env.step(None).unwrap();
        assert_eq!(env.game().cleaned_total(), 2);
    }

    #[test]
    fn stale_resolution_is_flagged_for_the_later_agent() {
        let mut env = fig5(SteppingMode::ParallelBuggy, &[0, 1]);
        run_cycle(&mut env, &[CLEAN, CLEAN]);
        let infos = &env.status().unwrap().infos;
        assert_eq!(infos[&AgentId::indexed("agent", 0)]["stale_resolution"], false);
        assert_eq!(infos[&AgentId::indexed("agent", 1)]["stale_resolution"], true);
    }

    #[test]
    fn apples_pay_the_collector() {
        let config = CleanupConfig {
            width: 3,
            height: 1,
            river: vec![],
            waste: vec![],
            apples: vec![Pos::new(1, 0)],
            agent_starts: vec![AgentStart { pos: Pos::new(0, 0), orientation: Dir::East }],
            beam_length: 5,
            stepping_mode: SteppingMode::Aec,
            apple_spawn_prob: 0.0,
            max_cycles: 2,
        };
        let mut env = cleanup_new(config).unwrap();
        env.reset(0);
        env.step(Some(Dir::East as usize)).unwrap();
        assert_eq!(env.status().unwrap().rewards[&AgentId::indexed("agent", 0)], 1.0);
        assert_eq!(env.game().tile(Pos::new(1, 0)), Tile::Empty);
    }
}
