//! Warehouse grid model: occupancy, robot instances and collision semantics.
//!
//! A warehouse map is an `h x w` grid in which every free cell lies on a
//! passage row or a passage column. Passage rows are always three rows apart
//! (shelf blocks are two cells tall); passage columns are `w_spacing` apart.
//! All indices are 1-based, in files as well as in memory.

use std::collections::hash_map::Entry;
use std::collections::{HashMap, VecDeque};
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Vertical spacing between consecutive passage rows. Shelf blocks are two
/// cells tall, so this is fixed for every valid map.
pub const ROW_SPACING: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Rows,
    Cols,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::Rows => write!(f, "rows"),
            Axis::Cols => write!(f, "cols"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GridError {
    #[error("{axis} passage index set needs at least two entries")]
    TooFewIndices { axis: Axis },
    #[error("{axis} passage index set must be strictly increasing")]
    UnsortedIndexSet { axis: Axis },
    #[error("{axis} passage gaps are not all equal")]
    NonUniformSpacing { axis: Axis },
    #[error("{axis} passage gap {gap} leaves no room for shelves")]
    SpacingTooSmall { axis: Axis, gap: usize },
    #[error("row passage gap must be {ROW_SPACING}, got {gap}")]
    RowSpacingUnsupported { gap: usize },
    #[error("{axis} passage indices must start at 1 and end at the border")]
    BoundaryMissing { axis: Axis },
    #[error("cell ({0}, {1}) is outside the grid", v.row, v.col)]
    OutOfBounds { v: GridVertex },
    #[error("cell ({0}, {1}) is occupied by a shelf", v.row, v.col)]
    NotFree { v: GridVertex },
    #[error("requested {requested} robots but the map has only {free} free cells")]
    TooManyRobots { requested: usize, free: usize },
}

/// A grid cell, `row` in `1..=h`, `col` in `1..=w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct GridVertex {
    pub row: usize,
    pub col: usize,
}

impl GridVertex {
    pub fn new(row: usize, col: usize) -> Self {
        GridVertex { row, col }
    }

    pub fn manhattan(self, other: GridVertex) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }
}

impl From<[usize; 2]> for GridVertex {
    fn from(a: [usize; 2]) -> Self {
        GridVertex { row: a[0], col: a[1] }
    }
}

impl From<GridVertex> for [usize; 2] {
    fn from(v: GridVertex) -> Self {
        [v.row, v.col]
    }
}

impl fmt::Display for GridVertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// Occupancy model of one warehouse. Free cells are exactly the cells on a
/// passage row or passage column; everything else is shelf.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    pub h: usize,
    pub w: usize,
    pub h_rows: Vec<usize>,
    pub v_cols: Vec<usize>,
    row_is_passage: Vec<bool>,
    col_is_passage: Vec<bool>,
}

fn check_axis(axis: Axis, idx: &[usize], last_expected: usize) -> Result<usize, GridError> {
    if idx.len() < 2 {
        return Err(GridError::TooFewIndices { axis });
    }
    if idx.windows(2).any(|p| p[1] <= p[0]) {
        return Err(GridError::UnsortedIndexSet { axis });
    }
    let gap = idx[1] - idx[0];
    if idx.windows(2).any(|p| p[1] - p[0] != gap) {
        return Err(GridError::NonUniformSpacing { axis });
    }
    if gap < 2 {
        return Err(GridError::SpacingTooSmall { axis, gap });
    }
    if axis == Axis::Rows && gap != ROW_SPACING {
        return Err(GridError::RowSpacingUnsupported { gap });
    }
    if idx[0] != 1 || *idx.last().unwrap() != last_expected {
        return Err(GridError::BoundaryMissing { axis });
    }
    Ok(gap)
}

impl GridMap {
    /// Validates the passage layout and builds the map.
    pub fn new(h: usize, w: usize, h_rows: Vec<usize>, v_cols: Vec<usize>) -> Result<Self, GridError> {
        check_axis(Axis::Rows, &h_rows, h)?;
        check_axis(Axis::Cols, &v_cols, w)?;
        let mut row_is_passage = vec![false; h + 1];
        for &r in &h_rows {
            row_is_passage[r] = true;
        }
        let mut col_is_passage = vec![false; w + 1];
        for &c in &v_cols {
            col_is_passage[c] = true;
        }
        Ok(GridMap { h, w, h_rows, v_cols, row_is_passage, col_is_passage })
    }

    pub fn in_bounds(&self, v: GridVertex) -> bool {
        (1..=self.h).contains(&v.row) && (1..=self.w).contains(&v.col)
    }

    /// True for cells on a passage row or column. Out-of-bounds cells are not free.
    pub fn is_free(&self, v: GridVertex) -> bool {
        self.in_bounds(v) && (self.row_is_passage[v.row] || self.col_is_passage[v.col])
    }

    /// True for cells where a passage row and a passage column intersect.
    pub fn is_crossing(&self, v: GridVertex) -> bool {
        self.in_bounds(v) && self.row_is_passage[v.row] && self.col_is_passage[v.col]
    }

    /// Horizontal passage spacing; shelf blocks are `col_spacing() - 1` cells wide.
    pub fn col_spacing(&self) -> usize {
        self.v_cols[1] - self.v_cols[0]
    }

    pub fn shelf_count(&self) -> usize {
        (self.h_rows.len() - 1) * (self.v_cols.len() - 1)
    }

    /// All free cells in row-major order.
    pub fn free_cells(&self) -> Vec<GridVertex> {
        let mut out = Vec::new();
        for row in 1..=self.h {
            for col in 1..=self.w {
                let v = GridVertex::new(row, col);
                if self.is_free(v) {
                    out.push(v);
                }
            }
        }
        out
    }

    pub fn free_cell_count(&self) -> usize {
        let shelf_cells = self.shelf_count() * (ROW_SPACING - 1) * (self.col_spacing() - 1);
        self.h * self.w - shelf_cells
    }

    /// Free 4-neighbours of a free cell, in north/south/west/east order.
    pub fn neighbors(&self, v: GridVertex) -> Result<Vec<GridVertex>, GridError> {
        if !self.in_bounds(v) {
            return Err(GridError::OutOfBounds { v });
        }
        if !self.is_free(v) {
            return Err(GridError::NotFree { v });
        }
        let mut out = Vec::with_capacity(4);
        if v.row > 1 {
            out.push(GridVertex::new(v.row - 1, v.col));
        }
        if v.row < self.h {
            out.push(GridVertex::new(v.row + 1, v.col));
        }
        if v.col > 1 {
            out.push(GridVertex::new(v.row, v.col - 1));
        }
        if v.col < self.w {
            out.push(GridVertex::new(v.row, v.col + 1));
        }
        out.retain(|&n| self.is_free(n));
        Ok(out)
    }
}

/// Breadth-first shortest path between free cells, ignoring all other robots.
/// Returns the full cell sequence including both endpoints, or `None` when the
/// target is unreachable. Ties resolve by the fixed neighbour order, so the
/// result is deterministic.
pub fn grid_shortest_path(map: &GridMap, start: GridVertex, goal: GridVertex) -> Option<Vec<GridVertex>> {
    if !map.is_free(start) || !map.is_free(goal) {
        return None;
    }
    if start == goal {
        return Some(vec![start]);
    }
    let mut pred: HashMap<GridVertex, GridVertex> = HashMap::new();
    let mut queue = VecDeque::new();
    queue.push_back(start);
    pred.insert(start, start);
    while let Some(v) = queue.pop_front() {
        if v == goal {
            break;
        }
        for n in map.neighbors(v).expect("queued cells are free") {
            if let Entry::Vacant(slot) = pred.entry(n) {
                slot.insert(v);
                queue.push_back(n);
            }
        }
    }
    if !pred.contains_key(&goal) {
        return None;
    }
    let mut path = vec![goal];
    let mut cur = goal;
    while cur != start {
        cur = pred[&cur];
        path.push(cur);
    }
    path.reverse();
    Some(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Robot {
    pub id: usize,
    pub start: GridVertex,
    pub goal: GridVertex,
}

/// A planning task: robots with fixed start and goal cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub robots: Vec<Robot>,
    pub seed: u64,
}

impl Instance {
    pub fn robot_count(&self) -> usize {
        self.robots.len()
    }
}

/// Samples starts and goals uniformly without replacement from the free
/// cells, starts first, then goals from a fresh pass over the same stream.
/// Starts are pairwise distinct and goals are pairwise distinct; a robot may
/// still be sampled with `start == goal`.
pub fn generate_instance(map: &GridMap, n: usize, seed: u64) -> Result<Instance, GridError> {
    let free = map.free_cells();
    if n > free.len() {
        return Err(GridError::TooManyRobots { requested: n, free: free.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts = rand::seq::index::sample(&mut rng, free.len(), n);
    let goals = rand::seq::index::sample(&mut rng, free.len(), n);
    let robots = starts
        .iter()
        .zip(goals.iter())
        .enumerate()
        .map(|(id, (s, g))| Robot { id, start: free[s], goal: free[g] })
        .collect();
    Ok(Instance { robots, seed })
}

/// A grid path with a release time. The robot occupies `cells[k]` at time
/// `release + k` and exists only during `[release, release + cells.len() - 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridPath {
    pub robot: usize,
    pub release: u64,
    pub cells: Vec<GridVertex>,
}

impl GridPath {
    pub fn new(robot: usize, release: u64, cells: Vec<GridVertex>) -> Self {
        GridPath { robot, release, cells }
    }

    /// Number of residing-vertex changes. Waiting steps (repeated cells) do
    /// not count, so `len == 0` exactly when the robot never leaves its start.
    pub fn len(&self) -> usize {
        self.cells.windows(2).filter(|p| p[0] != p[1]).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn position_at(&self, t: u64) -> Option<GridVertex> {
        if self.cells.is_empty() || t < self.release {
            return None;
        }
        let k = (t - self.release) as usize;
        if k >= self.cells.len() {
            return None;
        }
        Some(self.cells[k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollisionKind {
    /// Both robots reside in the same cell at the same time.
    Meet(GridVertex),
    /// The robots exchange adjacent cells in one step.
    HeadOn(GridVertex, GridVertex),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Collision {
    pub time: u64,
    pub kind: CollisionKind,
}

/// First collision between two timed paths, if any. Robots are absent before
/// release and after arrival, so disjoint activity windows never collide.
pub fn detect_collision(a: &GridPath, b: &GridPath) -> Option<Collision> {
    if a.cells.is_empty() || b.cells.is_empty() {
        return None;
    }
    let start = a.release.max(b.release);
    let end = (a.release + a.cells.len() as u64 - 1).min(b.release + b.cells.len() as u64 - 1);
    if start > end {
        return None;
    }
    for t in start..=end {
        let (pa, pb) = (a.position_at(t)?, b.position_at(t)?);
        if pa == pb {
            return Some(Collision { time: t, kind: CollisionKind::Meet(pa) });
        }
        if t < end {
            if let (Some(na), Some(nb)) = (a.position_at(t + 1), b.position_at(t + 1)) {
                if na == pb && nb == pa && na != pa {
                    return Some(Collision { time: t + 1, kind: CollisionKind::HeadOn(na, nb) });
                }
            }
        }
    }
    None
}

/// On-disk instance format. Round-trips byte-exactly through
/// [`save_instance`] / [`load_instance`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    pub h: usize,
    pub w: usize,
    #[serde(rename = "hRows")]
    pub h_rows: Vec<usize>,
    #[serde(rename = "vCols")]
    pub v_cols: Vec<usize>,
    pub robots: Vec<Robot>,
    pub seed: u64,
}

pub fn save_instance(map: &GridMap, inst: &Instance) -> String {
    let file = InstanceFile {
        h: map.h,
        w: map.w,
        h_rows: map.h_rows.clone(),
        v_cols: map.v_cols.clone(),
        robots: inst.robots.clone(),
        seed: inst.seed,
    };
    let mut text = serde_json::to_string_pretty(&file).expect("instance serializes");
    text.push('\n');
    text
}

#[derive(Debug, Error)]
pub enum InstanceLoadError {
    #[error("instance file is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Grid(#[from] GridError),
}

pub fn load_instance(text: &str) -> Result<(GridMap, Instance), InstanceLoadError> {
    let file: InstanceFile = serde_json::from_str(text)?;
    let map = GridMap::new(file.h, file.w, file.h_rows, file.v_cols)?;
    for robot in &file.robots {
        for cell in [robot.start, robot.goal] {
            if !map.is_free(cell) {
                return Err(GridError::NotFree { v: cell }.into());
            }
        }
    }
    Ok((map, Instance { robots: file.robots, seed: file.seed }))
}
