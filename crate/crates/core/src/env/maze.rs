//! Procedural gridworld mazes.
//!
//! Cells are indexed `y * width + x`. Actions: 0 up, 1 right, 2 down,
//! 3 left; a move into a wall or off the grid leaves the agent in place.
//!
//! Text format: a `(2h+1) × (2w+1)` character grid where cell `(x, y)` sits
//! at row `2y+1`, column `2x+1`; `#` is a wall, `.` a free cell or opening,
//! `S` a cell in the start region and `G` the goal.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ACTIONS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardSpec {
    pub goal: f64,
    pub step_cost: f64,
}

impl Default for RewardSpec {
    fn default() -> Self {
        Self {
            goal: 1.0,
            step_cost: -0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMaze {
    width: usize,
    height: usize,
    /// Blocked undirected cell pairs, stored with the smaller index first.
    walls: BTreeSet<(usize, usize)>,
    goal: usize,
    /// Columns `x < seen_cols` form the seen region.
    seen_cols: usize,
    /// Cells from which episodes may start.
    pub start_region: Vec<usize>,
}

impl GridMaze {
    pub fn open(width: usize, height: usize, goal: usize) -> Result<Self> {
        Self::with_walls(width, height, BTreeSet::new(), goal)
    }

    pub fn with_walls(width: usize, height: usize, walls: BTreeSet<(usize, usize)>, goal: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param("size", "maze must have at least one cell"));
        }
        if goal >= width * height {
            return Err(Error::param("goal", "goal outside the grid"));
        }
        let maze = Self {
            width,
            height,
            walls,
            goal,
            seen_cols: width / 2,
            start_region: Vec::new(),
        };
        maze.check_reachable()?;
        Ok(maze)
    }

    /// Recursive-backtracker spanning tree, then removes `loop_density` of
    /// the remaining interior walls to add cycles.
    pub fn generate<R: Rng + ?Sized>(width: usize, height: usize, loop_density: f64, goal: usize, rng: &mut R) -> Result<Self> {
        let n = width * height;
        let mut all = BTreeSet::new();
        for c in 0..n {
            let (x, y) = (c % width, c / width);
            if x + 1 < width {
                all.insert((c, c + 1));
            }
            if y + 1 < height {
                all.insert((c, c + width));
            }
        }
        let mut walls = all.clone();
        let mut visited = vec![false; n];
        let mut stack = vec![rng.random_range(0..n)];
        visited[stack[0]] = true;
        while let Some(&c) = stack.last() {
            let mut options: Vec<usize> = neighbours(c, width, height).into_iter().filter(|&d| !visited[d]).collect();
            if options.is_empty() {
                stack.pop();
                continue;
            }
            options.shuffle(rng);
            let next = options[0];
            walls.remove(&(c.min(next), c.max(next)));
            visited[next] = true;
            stack.push(next);
        }
        let remaining: Vec<(usize, usize)> = walls.iter().copied().collect();
        for w in remaining {
            if rng.random::<f64>() < loop_density {
                walls.remove(&w);
            }
        }
        Self::with_walls(width, height, walls, goal)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn goal(&self) -> usize {
        self.goal
    }

    pub fn set_goal(&mut self, goal: usize) -> Result<()> {
        if goal >= self.n_cells() {
            return Err(Error::param("goal", "goal outside the grid"));
        }
        self.goal = goal;
        Ok(())
    }

    pub fn set_seen_cols(&mut self, cols: usize) {
        self.seen_cols = cols;
    }

    pub fn xy(&self, cell: usize) -> (usize, usize) {
        (cell % self.width, cell / self.width)
    }

    pub fn cell(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn is_seen(&self, cell: usize) -> bool {
        self.xy(cell).0 < self.seen_cols
    }

    pub fn blocked(&self, a: usize, b: usize) -> bool {
        self.walls.contains(&(a.min(b), a.max(b)))
    }

    pub fn wall_count(&self) -> usize {
        self.walls.len()
    }

    /// Deterministic transition.
    pub fn step(&self, cell: usize, action: usize) -> usize {
        let (x, y) = self.xy(cell);
        let target = match action {
            0 if y > 0 => Some(cell - self.width),
            1 if x + 1 < self.width => Some(cell + 1),
            2 if y + 1 < self.height => Some(cell + self.width),
            3 if x > 0 => Some(cell - 1),
            _ => None,
        };
        match target {
            Some(t) if !self.blocked(cell, t) => t,
            _ => cell,
        }
    }

    /// Reward for arriving in `next`.
    pub fn reward(&self, next: usize, spec: &RewardSpec) -> f64 {
        if next == self.goal {
            spec.goal
        } else {
            spec.step_cost
        }
    }

    /// Episode step cap `4 (w + h)`.
    pub fn step_cap(&self) -> usize {
        4 * (self.width + self.height)
    }

    /// BFS distance of every cell to the goal (`None` if unreachable).
    pub fn distances_to_goal(&self) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n_cells()];
        dist[self.goal] = Some(0);
        let mut queue = VecDeque::from([self.goal]);
        while let Some(c) = queue.pop_front() {
            let d = dist[c].unwrap_or(0);
            for a in 0..ACTIONS {
                // Moves are reversible, so stepping from `c` finds predecessors.
                let p = self.step(c, a);
                if p != c && dist[p].is_none() {
                    dist[p] = Some(d + 1);
                    queue.push_back(p);
                }
            }
        }
        dist
    }

    pub fn check_reachable(&self) -> Result<()> {
        if self.distances_to_goal().iter().all(Option::is_some) {
            Ok(())
        } else {
            Err(Error::InvalidInput("goal is not reachable from every cell".into()))
        }
    }

    /// A shortest-path action from `cell` (lowest index among optimal moves).
    pub fn oracle_action(&self, cell: usize) -> usize {
        let dist = self.distances_to_goal();
        (0..ACTIONS)
            .min_by_key(|&a| {
                let t = self.step(cell, a);
                if t == cell {
                    usize::MAX
                } else {
                    dist[t].unwrap_or(usize::MAX)
                }
            })
            .unwrap_or(0)
    }

    pub fn to_text(&self) -> String {
        let (w, h) = (self.width, self.height);
        let mut grid = vec![vec!['#'; 2 * w + 1]; 2 * h + 1];
        for c in 0..self.n_cells() {
            let (x, y) = self.xy(c);
            grid[2 * y + 1][2 * x + 1] = if c == self.goal {
                'G'
            } else if self.start_region.contains(&c) {
                'S'
            } else {
                '.'
            };
            if x + 1 < w && !self.blocked(c, c + 1) {
                grid[2 * y + 1][2 * x + 2] = '.';
            }
            if y + 1 < h && !self.blocked(c, c + w) {
                grid[2 * y + 2][2 * x + 1] = '.';
            }
        }
        let mut out = String::new();
        for row in grid {
            let _ = writeln!(out, "{}", row.into_iter().collect::<String>());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let rows: Vec<Vec<char>> = text.lines().filter(|l| !l.is_empty()).map(|l| l.chars().collect()).collect();
        let bad = || Error::InvalidInput("malformed maze text".into());
        if rows.len() < 3 || rows.len() % 2 == 0 || rows[0].len() < 3 || rows[0].len() % 2 == 0 {
            return Err(bad());
        }
        if rows.iter().any(|r| r.len() != rows[0].len()) {
            return Err(bad());
        }
        let (h, w) = ((rows.len() - 1) / 2, (rows[0].len() - 1) / 2);
        let mut walls = BTreeSet::new();
        let mut goal = None;
        let mut starts = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let c = y * w + x;
                match rows[2 * y + 1][2 * x + 1] {
                    'G' => goal = Some(c),
                    'S' => starts.push(c),
                    '.' => {}
                    _ => return Err(bad()),
                }
                if x + 1 < w && rows[2 * y + 1][2 * x + 2] == '#' {
                    walls.insert((c, c + 1));
                }
                if y + 1 < h && rows[2 * y + 2][2 * x + 1] == '#' {
                    walls.insert((c, c + w));
                }
            }
        }
        let mut maze = Self::with_walls(w, h, walls, goal.ok_or_else(bad)?)?;
        maze.start_region = starts;
        Ok(maze)
    }
}

fn neighbours(c: usize, w: usize, h: usize) -> Vec<usize> {
    let (x, y) = (c % w, c / w);
    let mut out = Vec::with_capacity(4);
    if y > 0 {
        out.push(c - w);
    }
    if x + 1 < w {
        out.push(c + 1);
    }
    if y + 1 < h {
        out.push(c + w);
    }
    if x > 0 {
        out.push(c - 1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;

    #[test]
    fn open_grid_moves_and_walls() {
        let m = GridMaze::open(3, 3, 8).unwrap();
        assert_eq!(m.step(4, 0), 1);
        assert_eq!(m.step(4, 1), 5);
        assert_eq!(m.step(4, 2), 7);
        assert_eq!(m.step(4, 3), 3);
        assert_eq!(m.step(0, 0), 0);
        assert_eq!(m.step(0, 3), 0);
        let walled = GridMaze::with_walls(3, 3, [(3, 4)].into_iter().collect(), 8).unwrap();
        assert_eq!(walled.step(4, 3), 4);
        assert_eq!(m.step_cap(), 24);
    }

    #[test]
    fn text_round_trip() {
        let mut m = GridMaze::generate(8, 8, 0.1, 63, &mut stream_rng("maze", 0, "g")).unwrap();
        m.start_region = vec![0, 8, 9];
        let text = m.to_text();
        assert_eq!(text.lines().count(), 17);
        let back = GridMaze::from_text(&text).unwrap();
        assert_eq!(back.to_text(), text);
        assert_eq!(back.goal(), 63);
    }

    #[test]
    fn unreachable_goal_is_rejected() {
        // Wall off cell 0 completely in a 2×2 grid.
        let walls = [(0, 1), (0, 2)].into_iter().collect();
        assert!(GridMaze::with_walls(2, 2, walls, 3).is_err());
    }

    #[test]
    fn seen_region_default_is_left_half() {
        let m = GridMaze::open(8, 8, 63).unwrap();
        assert!(m.is_seen(m.cell(3, 5)));
        assert!(!m.is_seen(m.cell(4, 0)));
    }

    proptest! {
        #[test]
        fn generated_mazes_are_connected(seed in 0u64..300, density in 0.0f64..0.5) {
            let m = GridMaze::generate(8, 8, density, 63, &mut stream_rng("maze", seed, "g")).unwrap();
            prop_assert!(m.check_reachable().is_ok());
            // A spanning tree on 64 cells leaves 112 − 63 = 49 interior walls.
            prop_assert!(m.wall_count() <= 49);
        }
    }
}
