//! Occupancy grid, the 8-way move model and Manhattan distance.
//!
//! Rows are stored top to bottom, so `y = 0` is the first line of the ASCII
//! document and "north" means decreasing `y`.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Column/row index of a grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[u32; 2]", into = "[u32; 2]")]
pub struct CellCoord {
    pub x: u32,
    pub y: u32,
}

impl CellCoord {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }

    /// Offset by a signed displacement, `None` when a coordinate would go negative.
    pub fn offset(self, dx: i32, dy: i32) -> Option<Self> {
        let x = self.x.checked_add_signed(dx)?;
        let y = self.y.checked_add_signed(dy)?;
        Some(Self { x, y })
    }

    /// Chebyshev (king-move) distance.
    pub fn chebyshev(self, other: Self) -> u32 {
        self.x.abs_diff(other.x).max(self.y.abs_diff(other.y))
    }

    /// True when `other` is one of the eight neighbours of `self`.
    pub fn is_adjacent8(self, other: Self) -> bool {
        self != other && self.chebyshev(other) == 1
    }
}

impl From<[u32; 2]> for CellCoord {
    fn from([x, y]: [u32; 2]) -> Self {
        Self { x, y }
    }
}

impl From<CellCoord> for [u32; 2] {
    fn from(c: CellCoord) -> Self {
        [c.x, c.y]
    }
}

impl fmt::Display for CellCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// Manhattan distance, used both as the move cost metric and the heuristic.
pub fn manhattan(a: CellCoord, b: CellCoord) -> u32 {
    a.x.abs_diff(b.x) + a.y.abs_diff(b.y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    N,
    NE,
    E,
    SE,
    S,
    SW,
    W,
    NW,
}

impl Direction {
    /// Compass order used for successor generation and tie-breaking.
    pub const ALL: [Direction; 8] = [
        Direction::N,
        Direction::NE,
        Direction::E,
        Direction::SE,
        Direction::S,
        Direction::SW,
        Direction::W,
        Direction::NW,
    ];

    pub const fn delta(self) -> (i32, i32) {
        match self {
            Direction::N => (0, -1),
            Direction::NE => (1, -1),
            Direction::E => (1, 0),
            Direction::SE => (1, 1),
            Direction::S => (0, 1),
            Direction::SW => (-1, 1),
            Direction::W => (-1, 0),
            Direction::NW => (-1, -1),
        }
    }

    pub const fn is_diagonal(self) -> bool {
        let (dx, dy) = self.delta();
        dx != 0 && dy != 0
    }

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

/// One step of the agent. The cost is the Manhattan displacement of the step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Move {
    pub direction: Direction,
    pub step_cost: u32,
}

impl Move {
    pub const fn new(direction: Direction) -> Self {
        let step_cost = if direction.is_diagonal() { 2 } else { 1 };
        Self { direction, step_cost }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tile {
    Free,
    Obstacle,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("row {row} has {got} cells, expected {expected}")]
    RaggedRows { row: usize, expected: usize, got: usize },
    #[error("map needs exactly one S and one G (found {starts} S, {goals} G)")]
    MissingEndpoint { starts: usize, goals: usize },
    #[error("illegal character {ch:?} at row {row}, column {col}")]
    IllegalChar { ch: char, row: usize, col: usize },
    #[error("start or goal lies on an obstacle or outside the grid")]
    EndpointOnObstacle,
    #[error("map is empty or has a single cell")]
    TooSmall,
    #[error("cell count {got} does not match {width}x{height}")]
    CellCountMismatch { width: u32, height: u32, got: usize },
    #[error("cell {0} is out of bounds")]
    OutOfBounds(CellCoord),
    #[error("cell {0} is an obstacle")]
    OnObstacle(CellCoord),
}

/// Rectangular occupancy grid with a start and a goal. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridMap {
    name: String,
    width: u32,
    height: u32,
    cells: Vec<Tile>,
    start: CellCoord,
    goal: CellCoord,
}

impl GridMap {
    pub fn new(
        name: impl Into<String>,
        width: u32,
        height: u32,
        cells: Vec<Tile>,
        start: CellCoord,
        goal: CellCoord,
    ) -> Result<Self, GridError> {
        if (width as usize) * (height as usize) < 2 {
            return Err(GridError::TooSmall);
        }
        if cells.len() != (width as usize) * (height as usize) {
            return Err(GridError::CellCountMismatch { width, height, got: cells.len() });
        }
        if start == goal {
            return Err(GridError::MissingEndpoint { starts: 1, goals: 0 });
        }
        let map = Self { name: name.into(), width, height, cells, start, goal };
        if !map.is_free(start) || !map.is_free(goal) {
            return Err(GridError::EndpointOnObstacle);
        }
        Ok(map)
    }

    /// Parse the ASCII map format: `.` free, `#` obstacle, `S` start, `G` goal.
    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self, GridError> {
        let mut rows: Vec<&str> = text.lines().map(str::trim_end).collect();
        while rows.last().is_some_and(|l| l.is_empty()) {
            rows.pop();
        }
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut cells = Vec::with_capacity(width * rows.len());
        let mut starts = Vec::new();
        let mut goals = Vec::new();
        for (row, line) in rows.iter().enumerate() {
            let got = line.chars().count();
            if got != width {
                return Err(GridError::RaggedRows { row, expected: width, got });
            }
            for (col, ch) in line.chars().enumerate() {
                let here = CellCoord::new(col as u32, row as u32);
                let tile = match ch {
                    '.' => Tile::Free,
                    '#' => Tile::Obstacle,
                    'S' => {
                        starts.push(here);
                        Tile::Free
                    }
                    'G' => {
                        goals.push(here);
                        Tile::Free
                    }
                    _ => return Err(GridError::IllegalChar { ch, row, col }),
                };
                cells.push(tile);
            }
        }
        if width * rows.len() < 2 {
            return Err(GridError::TooSmall);
        }
        if starts.len() != 1 || goals.len() != 1 {
            return Err(GridError::MissingEndpoint { starts: starts.len(), goals: goals.len() });
        }
        Self::new(name, width as u32, rows.len() as u32, cells, starts[0], goals[0])
    }

    /// Inverse of [`GridMap::parse`]: newline-terminated rows.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity((self.width as usize + 1) * self.height as usize);
        for y in 0..self.height {
            for x in 0..self.width {
                let c = CellCoord::new(x, y);
                out.push(if c == self.start {
                    'S'
                } else if c == self.goal {
                    'G'
                } else if self.tile(c) == Some(Tile::Obstacle) {
                    '#'
                } else {
                    '.'
                });
            }
            out.push('\n');
        }
        out
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn start(&self) -> CellCoord {
        self.start
    }

    pub fn goal(&self) -> CellCoord {
        self.goal
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn tiles(&self) -> &[Tile] {
        &self.cells
    }

    /// Copy of this map with different endpoints.
    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_endpoints(&self, start: CellCoord, goal: CellCoord) -> Result<Self, GridError> {
        Self::new(self.name.clone(), self.width, self.height, self.cells.clone(), start, goal)
    }

    pub fn in_bounds(&self, c: CellCoord) -> bool {
        c.x < self.width && c.y < self.height
    }

    /// Row-major index of an in-bounds cell.
    pub fn index(&self, c: CellCoord) -> Option<usize> {
        self.in_bounds(c).then(|| c.y as usize * self.width as usize + c.x as usize)
    }

    pub fn coord(&self, index: usize) -> CellCoord {
        let w = self.width as usize;
        CellCoord::new((index % w) as u32, (index / w) as u32)
    }

    pub fn tile(&self, c: CellCoord) -> Option<Tile> {
        self.index(c).map(|i| self.cells[i])
    }

    pub fn is_free(&self, c: CellCoord) -> bool {
        self.tile(c) == Some(Tile::Free)
    }

    pub fn obstacles(&self) -> impl Iterator<Item = CellCoord> + '_ {
        self.cells.iter().enumerate().filter(|(_, t)| **t == Tile::Obstacle).map(|(i, _)| self.coord(i))
    }

    pub fn free_cells(&self) -> impl Iterator<Item = CellCoord> + '_ {
        self.cells.iter().enumerate().filter(|(_, t)| **t == Tile::Free).map(|(i, _)| self.coord(i))
    }

    /// Neighbour reached by `dir`, if the move is legal. Diagonal moves need
    /// both flanking orthogonal cells free.
    pub fn step(&self, s: CellCoord, dir: Direction) -> Option<CellCoord> {
        let (dx, dy) = dir.delta();
        let t = s.offset(dx, dy).filter(|t| self.is_free(*t))?;
        if dir.is_diagonal() {
            let flank_a = s.offset(dx, 0)?;
            let flank_b = s.offset(0, dy)?;
            if !self.is_free(flank_a) || !self.is_free(flank_b) {
                return None;
            }
        }
        Some(t)
    }

    /// Legal moves out of `s` in compass order, without validating `s`.
    pub fn neighbors(&self, s: CellCoord) -> impl Iterator<Item = (CellCoord, Move)> + '_ {
        Direction::ALL.into_iter().filter_map(move |d| self.step(s, d).map(|t| (t, Move::new(d))))
    }

    /// Every legal one-step move out of `s`, in N, NE, E, SE, S, SW, W, NW order.
    pub fn successors(&self, s: CellCoord) -> Result<Vec<(CellCoord, Move)>, GridError> {
        self.check_free(s)?;
        Ok(self.neighbors(s).collect())
    }

    pub fn check_free(&self, s: CellCoord) -> Result<(), GridError> {
        match self.tile(s) {
            None => Err(GridError::OutOfBounds(s)),
            Some(Tile::Obstacle) => Err(GridError::OnObstacle(s)),
            Some(Tile::Free) => Ok(()),
        }
    }

    /// Cells of the discrete (Bresenham) segment from `a` to `b`, both ends included.
    pub fn line(a: CellCoord, b: CellCoord) -> Vec<CellCoord> {
        let (mut x, mut y) = (a.x as i64, a.y as i64);
        let (x1, y1) = (b.x as i64, b.y as i64);
        let dx = (x1 - x).abs();
        let dy = -(y1 - y).abs();
        let sx = if x < x1 { 1 } else { -1 };
        let sy = if y < y1 { 1 } else { -1 };
        let mut err = dx + dy;
        let mut out = Vec::with_capacity((dx - dy) as usize + 1);
        loop {
            out.push(CellCoord::new(x as u32, y as u32));
            if x == x1 && y == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
        out
    }

    /// True when every cell on the segment `a -> b` is free.
    pub fn line_is_clear(&self, a: CellCoord, b: CellCoord) -> bool {
        Self::line(a, b).into_iter().all(|c| self.is_free(c))
    }
}
