//! Integer grid geometry shared by the grid worlds. `x` grows East, `y` grows North.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[i64; 2]", into = "[i64; 2]")]
pub struct Pos {
    pub x: i64,
    pub y: i64,
}

impl Pos {
    pub const fn new(x: i64, y: i64) -> Self {
        Self { x, y }
    }

    pub fn step(self, dir: Dir) -> Self {
        let (dx, dy) = dir.delta();
        Self { x: self.x + dx, y: self.y + dy }
    }

    pub fn offset(self, dir: Dir, k: i64) -> Self {
        let (dx, dy) = dir.delta();
        Self { x: self.x + k * dx, y: self.y + k * dy }
    }

    pub fn manhattan(self, other: Pos) -> i64 {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }

    pub fn in_bounds(self, width: usize, height: usize) -> bool {
        self.x >= 0 && self.y >= 0 && (self.x as usize) < width && (self.y as usize) < height
    }

    pub fn to_json(self) -> serde_json::Value {
        serde_json::json!([self.x, self.y])
    }
}

impl From<[i64; 2]> for Pos {
    fn from([x, y]: [i64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Pos> for [i64; 2] {
    fn from(p: Pos) -> Self {
        [p.x, p.y]
    }
}

/// Cardinal directions; the discriminant is the movement action index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dir {
    North = 0,
    East = 1,
    South = 2,
    West = 3,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::North, Dir::East, Dir::South, Dir::West];

    pub fn from_index(i: usize) -> Option<Dir> {
        Self::ALL.get(i).copied()
    }

    pub fn delta(self) -> (i64, i64) {
        match self {
            Dir::North => (0, 1),
            Dir::East => (1, 0),
            Dir::South => (0, -1),
            Dir::West => (-1, 0),
        }
    }

    /// Counter-clockwise neighbour: the agent's left when facing `self`.
    pub fn left(self) -> Dir {
        Self::ALL[(self as usize + 3) % 4]
    }

    pub fn right(self) -> Dir {
        Self::ALL[(self as usize + 1) % 4]
    }
}
