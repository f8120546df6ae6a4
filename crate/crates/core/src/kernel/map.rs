//! Grid maps and their plain-text format.
//!
//! One row per line: `#` wall, `.` free, `G` goal, `S` start (a free cell).
//! The border must be all walls and a goal must be reachable from the start.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// The 5x5 map used throughout the examples and tests.
pub const DEMO_MAP: &str = "#####\n#S..#\n#.#.#\n#..G#\n#####\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cell {
    Free,
    Wall,
    Goal,
}

impl Cell {
    pub fn is_wall(self) -> bool {
        self == Cell::Wall
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MapError {
    #[error("map is empty")]
    Empty,
    #[error("map must be at least 3x3")]
    TooSmall,
    #[error("row {row} has width {found}, expected {expected}")]
    Ragged {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("unexpected character {ch:?} at ({x},{y})")]
    BadChar { ch: char, x: usize, y: usize },
    #[error("border cell ({x},{y}) is not a wall")]
    OpenBorder { x: usize, y: usize },
    #[error("map needs exactly one start cell, found {0}")]
    StartCount(usize),
    #[error("no goal reachable from the start")]
    GoalUnreachable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    start: (i32, i32),
}

impl GridMap {
    pub fn parse(text: &str) -> Result<Self, MapError> {
        let rows: Vec<&str> = text
            .lines()
            .map(|l| l.trim_end_matches('\r'))
            .filter(|l| !l.trim().is_empty())
            .collect();
        if rows.is_empty() {
            return Err(MapError::Empty);
        }
        let width = rows[0].chars().count();
        let height = rows.len();
        let mut cells = Vec::with_capacity(width * height);
        let mut starts = Vec::new();
        for (y, row) in rows.iter().enumerate() {
            let found = row.chars().count();
            if found != width {
                return Err(MapError::Ragged {
                    row: y,
                    found,
                    expected: width,
                });
            }
            for (x, ch) in row.chars().enumerate() {
                let cell = match ch {
                    '#' => Cell::Wall,
                    '.' => Cell::Free,
                    'G' => Cell::Goal,
                    'S' => {
                        starts.push((x as i32, y as i32));
                        Cell::Free
                    }
                    _ => return Err(MapError::BadChar { ch, x, y }),
                };
                cells.push(cell);
            }
        }
        if width < 3 || height < 3 {
            return Err(MapError::TooSmall);
        }
        for y in 0..height {
            for x in 0..width {
                let border = x == 0 || y == 0 || x == width - 1 || y == height - 1;
                if border && cells[y * width + x] != Cell::Wall {
                    return Err(MapError::OpenBorder { x, y });
                }
            }
        }
        if starts.len() != 1 {
            return Err(MapError::StartCount(starts.len()));
        }
        let map = Self {
            width,
            height,
            cells,
            start: starts[0],
        };
        if map.cell_distances(map.start).iter().zip(&map.cells).all(|(d, c)| {
            *c != Cell::Goal || d.is_none()
        }) {
            return Err(MapError::GoalUnreachable);
        }
        Ok(map)
    }

    pub fn demo() -> Self {
        Self::parse(DEMO_MAP).expect("demo map is valid")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn start(&self) -> (i32, i32) {
        self.start
    }

    pub fn contains(&self, x: i32, y: i32) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    pub fn cell(&self, x: i32, y: i32) -> Option<Cell> {
        self.contains(x, y)
            .then(|| self.cells[y as usize * self.width + x as usize])
    }

    /// Out-of-bounds counts as wall.
    pub fn blocked(&self, x: i32, y: i32) -> bool {
        self.cell(x, y).is_none_or(Cell::is_wall)
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn goals(&self) -> impl Iterator<Item = (i32, i32)> + '_ {
        self.cells.iter().enumerate().filter_map(|(i, c)| {
            (*c == Cell::Goal).then_some(((i % self.width) as i32, (i / self.width) as i32))
        })
    }

    pub fn wall_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_wall()).count()
    }

    /// 4-connected breadth-first distances over non-wall cells.
    pub fn cell_distances(&self, from: (i32, i32)) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.cells.len()];
        if self.blocked(from.0, from.1) {
            return dist;
        }
        let idx = |x: i32, y: i32| y as usize * self.width + x as usize;
        dist[idx(from.0, from.1)] = Some(0);
        let mut queue = VecDeque::from([from]);
        while let Some((x, y)) = queue.pop_front() {
            let d = dist[idx(x, y)].unwrap_or(0);
            for (dx, dy) in [(0, -1), (1, 0), (0, 1), (-1, 0)] {
                let (nx, ny) = (x + dx, y + dy);
                if !self.blocked(nx, ny) && dist[idx(nx, ny)].is_none() {
                    dist[idx(nx, ny)] = Some(d + 1);
                    queue.push_back((nx, ny));
                }
            }
        }
        dist
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity((self.width + 1) * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                let ch = if (x as i32, y as i32) == self.start {
                    'S'
                } else {
                    match self.cells[y * self.width + x] {
                        Cell::Wall => '#',
                        Cell::Free => '.',
                        Cell::Goal => 'G',
                    }
                };
                s.push(ch);
            }
            s.push('\n');
        }
        s
    }

    /// Copy with one cell replaced. Used to build map variants in tests.
    pub fn with_cell(&self, x: i32, y: i32, cell: Cell) -> Self {
        let mut m = self.clone();
        if m.contains(x, y) {
            m.cells[y as usize * m.width + x as usize] = cell;
        }
        m
    }
}
