//! Two-player tic-tac-toe. `player_0` marks first.

use crate::aec::{
    Action, AgentId, EnvError, EnvRng, Game, GlobalState, Info, Observation, Sequential, SpaceSpec,
    StepCtx,
};

const LINES: [[usize; 3]; 8] = [
    [0, 1, 2], [3, 4, 5], [6, 7, 8],
    [0, 3, 6], [1, 4, 7], [2, 5, 8],
    [0, 4, 8], [2, 4, 6],
];

/// Cell `k` is row `k / 3`, column `k % 3`. Observation planes are absolute:
/// plane 0 holds `player_0`'s marks, plane 1 `player_1`'s.
#[derive(Clone, Debug)]
pub struct TicTacToe {
    board: [Option<usize>; 9],
    turn: usize,
    over: bool,
    players: [AgentId; 2],
}

pub type TicTacToeEnv = Sequential<TicTacToe>;

pub fn tictactoe_new() -> TicTacToeEnv {
    Sequential::new(TicTacToe::default())
}

impl Default for TicTacToe {
    fn default() -> Self {
        Self {
            board: [None; 9],
            turn: 0,
            over: false,
            players: [AgentId::indexed("player", 0), AgentId::indexed("player", 1)],
        }
    }
}

impl TicTacToe {
    fn seat(&self, agent: &AgentId) -> Option<usize> {
        self.players.iter().position(|p| p == agent)
    }

    pub fn board(&self) -> &[Option<usize>; 9] {
        &self.board
    }

    fn winner(&self) -> Option<usize> {
        LINES.iter().find_map(|line| {
            let first = self.board[line[0]]?;
            line.iter().all(|&c| self.board[c] == Some(first)).then_some(first)
        })
    }

    fn planes(&self) -> Observation {
        let mut obs = Observation::zeros(vec![3, 3, 2]);
        for (cell, mark) in self.board.iter().enumerate() {
            if let Some(seat) = mark {
                obs.set(&[cell / 3, cell % 3, *seat], 1.0);
            }
        }
        obs
    }
}

impl Game for TicTacToe {
    fn name(&self) -> &str {
        "tictactoe"
    }

    fn reset(&mut self, _seed: u64, _rng: &mut EnvRng) -> Vec<AgentId> {
        *self = Self::default();
        self.players.to_vec()
    }

    fn next_actor(&self) -> AgentId {
        self.players[self.turn].clone()
    }

    fn apply(
        &mut self,
        actor: &AgentId,
        action: Option<Action>,
        ctx: &mut StepCtx<'_>,
    ) -> Result<(), EnvError> {
        let seat = self.seat(actor).ok_or_else(|| EnvError::UnknownAgent(actor.clone()))?;
        let cell = action.ok_or_else(|| EnvError::NullActionForLiveAgent(actor.clone()))?;
        if self.board[cell].is_some() {
            return Err(EnvError::IllegalMove {
                agent: actor.clone(),
                action: cell,
                reason: "cell is occupied".into(),
            });
        }
        self.board[cell] = Some(seat);
        self.turn = 1 - seat;
        if let Some(w) = self.winner() {
            ctx.emit(&self.players[w], 1.0);
            ctx.emit(&self.players[1 - w], -1.0);
            self.over = true;
            ctx.end_episode();
        } else if self.board.iter().all(Option::is_some) {
            self.over = true;
            ctx.end_episode();
        }
        Ok(())
    }

    fn observe(&self, _agent: &AgentId) -> Observation {
        self.planes()
    }

    fn state(&self) -> GlobalState {
        GlobalState::Tensor(self.planes())
    }

    fn action_space(&self, agent: &AgentId) -> Option<SpaceSpec> {
        self.seat(agent).map(|_| SpaceSpec::discrete(9))
    }

    fn observation_space(&self, agent: &AgentId) -> Option<SpaceSpec> {
        self.seat(agent).map(|_| SpaceSpec::unit_box(vec![3, 3, 2]))
    }

    fn info(&self, _agent: &AgentId) -> Info {
        let mask: Vec<u8> =
            self.board.iter().map(|c| u8::from(c.is_none() && !self.over)).collect();
        Info::from([("action_mask".to_string(), serde_json::json!(mask))])
    }

    fn possible_agents(&self) -> Option<Vec<AgentId>> {
        Some(self.players.to_vec())
    }
}
