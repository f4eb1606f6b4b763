//! Compression of a warehouse grid into its topological map.
//!
//! Every crossing (intersection of a passage row and column) becomes a
//! vertex. Every corridor between two adjacent crossings is represented by a
//! single passage vertex placed on the median interior cell; for corridors
//! with an even number of interior cells the median is the cell nearer the
//! lexicographically smaller endpoint. Edge weights are Manhattan distances,
//! so the two edges of a corridor always sum to its full length.

use std::collections::HashMap;
use std::fmt;

use crate::grid::{GridMap, GridVertex, Instance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TopoVertexId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PassageId(pub usize);

impl fmt::Display for TopoVertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for PassageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Travel sense along a passage, measured from endpoint `a` (the
/// lexicographically smaller crossing) to endpoint `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    AToB,
    BToA,
}

impl Direction {
    pub fn flip(self) -> Direction {
        match self {
            Direction::AToB => Direction::BToA,
            Direction::BToA => Direction::AToB,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::AToB => "a_to_b",
            Direction::BToA => "b_to_a",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexKind {
    Crossing,
    /// The single median vertex of an unsplit passage.
    Passage(PassageId),
    /// Start-side copy of a split passage vertex.
    SplitIn(PassageId),
    /// Goal-side copy of a split passage vertex.
    SplitOut(PassageId),
}

impl VertexKind {
    pub fn passage(self) -> Option<PassageId> {
        match self {
            VertexKind::Crossing => None,
            VertexKind::Passage(p) | VertexKind::SplitIn(p) | VertexKind::SplitOut(p) => Some(p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TopoVertex {
    pub id: TopoVertexId,
    pub cell: GridVertex,
    pub kind: VertexKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PassageVertices {
    Single(TopoVertexId),
    Split { v_in: TopoVertexId, v_out: TopoVertexId },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Passage {
    pub id: PassageId,
    /// Crossing endpoint with the lexicographically smaller cell.
    pub a: TopoVertexId,
    pub b: TopoVertexId,
    /// Interior cells ordered from `a` to `b`; never empty.
    pub interior: Vec<GridVertex>,
    /// Index into `interior` of the passage vertex cell.
    pub median: usize,
    pub vertices: PassageVertices,
    /// Manhattan distance from the passage vertex to `a` / to `b`.
    pub weight_a: u32,
    pub weight_b: u32,
}

impl Passage {
    pub fn vp_cell(&self) -> GridVertex {
        self.interior[self.median]
    }

    /// Full corridor length in steps; equals `interior.len() + 1`.
    pub fn length(&self) -> u32 {
        self.weight_a + self.weight_b
    }

    pub fn is_split(&self) -> bool {
        matches!(self.vertices, PassageVertices::Split { .. })
    }

    pub fn copies(&self) -> Vec<TopoVertexId> {
        match self.vertices {
            PassageVertices::Single(v) => vec![v],
            PassageVertices::Split { v_in, v_out } => vec![v_in, v_out],
        }
    }

    pub fn primary_vertex(&self) -> TopoVertexId {
        match self.vertices {
            PassageVertices::Single(v) => v,
            PassageVertices::Split { v_in, .. } => v_in,
        }
    }

    /// Position of a cell along the corridor: 0 for the `a` crossing,
    /// `interior.len() + 1` for the `b` crossing.
    pub fn cell_position(&self, cell: GridVertex, topo: &TopoMap) -> Option<usize> {
        if cell == topo.vertex(self.a).cell {
            return Some(0);
        }
        if cell == topo.vertex(self.b).cell {
            return Some(self.interior.len() + 1);
        }
        self.interior.iter().position(|&c| c == cell).map(|k| k + 1)
    }

    /// Inclusive cell walk between two cells of this corridor (endpoints
    /// allowed), following the corridor in a single direction.
    pub fn cells_between(&self, from: GridVertex, to: GridVertex, topo: &TopoMap) -> Vec<GridVertex> {
        let seq: Vec<GridVertex> = std::iter::once(topo.vertex(self.a).cell)
            .chain(self.interior.iter().copied())
            .chain(std::iter::once(topo.vertex(self.b).cell))
            .collect();
        let i = self.cell_position(from, topo).expect("from lies on the corridor");
        let j = self.cell_position(to, topo).expect("to lies on the corridor");
        if i <= j {
            seq[i..=j].to_vec()
        } else {
            let mut out = seq[j..=i].to_vec();
            out.reverse();
            out
        }
    }
}

/// Direction per passage; `None` leaves the passage unrestricted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PassageDirections(pub Vec<Option<Direction>>);

impl PassageDirections {
    pub fn all_free(count: usize) -> Self {
        PassageDirections(vec![None; count])
    }

    pub fn get(&self, p: PassageId) -> Option<Direction> {
        self.0[p.0]
    }

    pub fn set(&mut self, p: PassageId, d: Direction) {
        self.0[p.0] = Some(d);
    }

    pub fn allows(&self, p: PassageId, d: Direction) -> bool {
        match self.0[p.0] {
            None => true,
            Some(fixed) => fixed == d,
        }
    }

    pub fn fixed_count(&self) -> usize {
        self.0.iter().filter(|d| d.is_some()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    /// Minimise the summed travel distance over all robots.
    Total,
    /// Minimise the maximum single-robot travel distance.
    Max,
}

/// A robot's route on the topological map. Stationary robots keep a
/// single-vertex path with zero cost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopoPath {
    pub robot: usize,
    pub vertices: Vec<TopoVertexId>,
    pub cost: u32,
}

impl TopoPath {
    pub fn is_simple(&self) -> bool {
        let mut seen = self.vertices.clone();
        seen.sort();
        seen.dedup();
        seen.len() == self.vertices.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopoPathSet {
    pub paths: Vec<TopoPath>,
}

impl TopoPathSet {
    pub fn objective(&self, kind: ObjectiveKind) -> u32 {
        match kind {
            ObjectiveKind::Total => self.paths.iter().map(|p| p.cost).sum(),
            ObjectiveKind::Max => self.paths.iter().map(|p| p.cost).max().unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopoMap {
    pub grid: GridMap,
    pub vertices: Vec<TopoVertex>,
    pub passages: Vec<Passage>,
    /// Crossing ids in cell order.
    pub crossings: Vec<TopoVertexId>,
    crossing_ids: HashMap<GridVertex, TopoVertexId>,
    cell_passage: HashMap<GridVertex, PassageId>,
    /// Incident passages per vertex id; only crossing entries are non-empty.
    incidence: Vec<Vec<PassageId>>,
}

impl TopoMap {
    pub fn vertex(&self, id: TopoVertexId) -> &TopoVertex {
        &self.vertices[id.0]
    }

    pub fn passage(&self, id: PassageId) -> &Passage {
        &self.passages[id.0]
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn crossing_at(&self, cell: GridVertex) -> Option<TopoVertexId> {
        self.crossing_ids.get(&cell).copied()
    }

    /// Passage owning an interior cell.
    pub fn passage_at(&self, cell: GridVertex) -> Option<PassageId> {
        self.cell_passage.get(&cell).copied()
    }

    pub fn incident_passages(&self, crossing: TopoVertexId) -> &[PassageId] {
        &self.incidence[crossing.0]
    }

    /// Test hook: removes every passage leaving a crossing, stranding
    /// anything that starts there.
    #[cfg(test)]
    pub(crate) fn strand_crossing(&mut self, v: TopoVertexId) {
        self.incidence[v.0].clear();
    }

    /// Undirected structural edges `(u, v, weight)` with `u` the crossing
    /// side; split copies contribute one edge pair each. Direct edges between
    /// split copies are robot-specific and not listed here.
    pub fn structural_edges(&self) -> Vec<(TopoVertexId, TopoVertexId, u32)> {
        let mut out = Vec::new();
        for p in &self.passages {
            for copy in p.copies() {
                out.push((p.a, copy, p.weight_a));
                out.push((p.b, copy, p.weight_b));
            }
        }
        out
    }

    /// Stable variable-name fragment for a vertex.
    pub fn vertex_name(&self, id: TopoVertexId) -> String {
        let v = self.vertex(id);
        match v.kind {
            VertexKind::Crossing => format!("c{}_{}", v.cell.row, v.cell.col),
            VertexKind::Passage(_) => format!("p{}_{}", v.cell.row, v.cell.col),
            VertexKind::SplitIn(_) => format!("p{}_{}in", v.cell.row, v.cell.col),
            VertexKind::SplitOut(_) => format!("p{}_{}out", v.cell.row, v.cell.col),
        }
    }

    /// Plain-text vertex and passage tables, used by golden tests and the CLI.
    pub fn dump_tables(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("vertices {}\n", self.vertices.len()));
        for v in &self.vertices {
            let kind = match v.kind {
                VertexKind::Crossing => "crossing",
                VertexKind::Passage(_) => "passage",
                VertexKind::SplitIn(_) => "split-in",
                VertexKind::SplitOut(_) => "split-out",
            };
            out.push_str(&format!("{} {} {}\n", v.id.0, kind, v.cell));
        }
        out.push_str(&format!("passages {}\n", self.passages.len()));
        for p in &self.passages {
            out.push_str(&format!(
                "{} a={} b={} vp={} cells={} w={}/{}\n",
                p.id.0,
                self.vertex(p.a).cell,
                self.vertex(p.b).cell,
                p.vp_cell(),
                p.interior.len(),
                p.weight_a,
                p.weight_b,
            ));
        }
        out
    }
}

/// Builds the topological map of a warehouse grid.
pub fn extract_topo(map: &GridMap) -> TopoMap {
    let mut vertices = Vec::new();
    let mut crossing_ids = HashMap::new();
    let mut crossings = Vec::new();
    for &row in &map.h_rows {
        for &col in &map.v_cols {
            let id = TopoVertexId(vertices.len());
            let cell = GridVertex::new(row, col);
            vertices.push(TopoVertex { id, cell, kind: VertexKind::Crossing });
            crossing_ids.insert(cell, id);
            crossings.push(id);
        }
    }

    // Corridor endpoints in (a, b) cell order: horizontal segments first per
    // row, then vertical per column, then sorted so ids are cell-ordered.
    let mut spans: Vec<(GridVertex, GridVertex)> = Vec::new();
    for &row in &map.h_rows {
        for cols in map.v_cols.windows(2) {
            spans.push((GridVertex::new(row, cols[0]), GridVertex::new(row, cols[1])));
        }
    }
    for &col in &map.v_cols {
        for rows in map.h_rows.windows(2) {
            spans.push((GridVertex::new(rows[0], col), GridVertex::new(rows[1], col)));
        }
    }
    spans.sort();

    let mut passages = Vec::new();
    let mut cell_passage = HashMap::new();
    for (a_cell, b_cell) in spans {
        let id = PassageId(passages.len());
        let interior: Vec<GridVertex> = if a_cell.row == b_cell.row {
            (a_cell.col + 1..b_cell.col).map(|c| GridVertex::new(a_cell.row, c)).collect()
        } else {
            (a_cell.row + 1..b_cell.row).map(|r| GridVertex::new(r, a_cell.col)).collect()
        };
        debug_assert!(!interior.is_empty());
        for &cell in &interior {
            cell_passage.insert(cell, id);
        }
        // Median interior cell; even counts round toward the `a` endpoint.
        let median = (interior.len() - 1) / 2;
        let vp = interior[median];
        passages.push(Passage {
            id,
            a: crossing_ids[&a_cell],
            b: crossing_ids[&b_cell],
            interior,
            median,
            vertices: PassageVertices::Single(TopoVertexId(0)), // placeholder
            weight_a: vp.manhattan(a_cell) as u32,
            weight_b: vp.manhattan(b_cell) as u32,
        });
    }
    for p in &mut passages {
        let id = TopoVertexId(vertices.len());
        vertices.push(TopoVertex { id, cell: p.vp_cell(), kind: VertexKind::Passage(p.id) });
        p.vertices = PassageVertices::Single(id);
    }

    let mut incidence = vec![Vec::new(); vertices.len()];
    for p in &passages {
        incidence[p.a.0].push(p.id);
        incidence[p.b.0].push(p.id);
    }

    TopoMap {
        grid: map.clone(),
        vertices,
        passages,
        crossings,
        crossing_ids,
        cell_passage,
        incidence,
    }
}

/// How one robot sits on the topological map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MappedRobot {
    pub robot: usize,
    pub start_cell: GridVertex,
    pub goal_cell: GridVertex,
    pub start: TopoVertexId,
    pub goal: TopoVertexId,
    /// Start and goal are the same grid cell; the robot is never routed on
    /// the topological map and keeps a single-cell grid path.
    pub stationary: bool,
    /// Set when both endpoints lie inside the same corridor (distinct cells).
    pub split: Option<SplitUse>,
}

/// Split bookkeeping for a robot whose start and goal share a corridor.
/// `direction` is the travel sense of the in-corridor walk from start cell to
/// goal cell; taking the direct edge between the split copies commits the
/// corridor to that sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitUse {
    pub passage: PassageId,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappedInstance {
    pub robots: Vec<MappedRobot>,
}

impl MappedInstance {
    pub fn robot(&self, id: usize) -> &MappedRobot {
        &self.robots[id]
    }

    /// Robots that actually travel (non-stationary).
    pub fn routed(&self) -> impl Iterator<Item = &MappedRobot> {
        self.robots.iter().filter(|r| !r.stationary)
    }
}

/// Maps every robot endpoint to its topological vertex: crossings map to
/// themselves, corridor cells map to the passage vertex of their corridor.
pub fn map_endpoints(topo: &TopoMap, inst: &Instance) -> MappedInstance {
    let map_cell = |cell: GridVertex| -> TopoVertexId {
        if let Some(c) = topo.crossing_at(cell) {
            c
        } else {
            let p = topo.passage_at(cell).expect("free non-crossing cells lie in a corridor");
            topo.passage(p).primary_vertex()
        }
    };
    let robots = inst
        .robots
        .iter()
        .map(|r| MappedRobot {
            robot: r.id,
            start_cell: r.start,
            goal_cell: r.goal,
            start: map_cell(r.start),
            goal: map_cell(r.goal),
            stationary: r.start == r.goal,
            split: None,
        })
        .collect();
    MappedInstance { robots }
}

/// Duplicates the passage vertex of every corridor that holds both endpoints
/// of some travelling robot. The existing vertex becomes the start-side copy
/// (keeping its id), a goal-side copy is appended, and all goals mapped to
/// the corridor move to the new copy. Travelling robots never share a start
/// and goal vertex afterwards.
pub fn split_identical_endpoints(topo: &TopoMap, mapped: &MappedInstance) -> (TopoMap, MappedInstance) {
    let mut topo = topo.clone();
    let mut mapped = mapped.clone();

    let mut to_split: Vec<PassageId> = mapped
        .robots
        .iter()
        .filter(|r| !r.stationary && r.start == r.goal)
        .map(|r| topo.vertex(r.start).kind.passage().expect("shared endpoint vertex lies in a corridor"))
        .collect();
    to_split.sort();
    to_split.dedup();

    for pid in to_split {
        let (v_in, v_out) = {
            let p = &topo.passages[pid.0];
            let v_in = p.primary_vertex();
            let v_out = TopoVertexId(topo.vertices.len());
            (v_in, v_out)
        };
        let cell = topo.vertex(v_in).cell;
        topo.vertices[v_in.0].kind = VertexKind::SplitIn(pid);
        topo.vertices.push(TopoVertex { id: v_out, cell, kind: VertexKind::SplitOut(pid) });
        topo.incidence.push(Vec::new());
        topo.passages[pid.0].vertices = PassageVertices::Split { v_in, v_out };

        for r in &mut mapped.robots {
            if r.stationary {
                continue;
            }
            if r.goal == v_in {
                r.goal = v_out;
            }
            if r.start == v_in && r.goal == v_out {
                let p = &topo.passages[pid.0];
                let i = p.cell_position(r.start_cell, &topo).expect("start lies in the corridor");
                let j = p.cell_position(r.goal_cell, &topo).expect("goal lies in the corridor");
                let direction = if i < j { Direction::AToB } else { Direction::BToA };
                r.split = Some(SplitUse { passage: pid, direction });
            }
        }
    }
    (topo, mapped)
}

/// Travel sense a robot commits a passage to when it traverses the directed
/// edge `(u, v)`. `None` for edges that touch no corridor direction (there
/// are none in practice; every structural edge has a crossing side).
///
/// The rule is uniform: moving from the `a` crossing into the corridor, or
/// from the corridor to the `b` crossing, is `AToB`; the mirrored cases are
/// `BToA`. A direct edge between split copies takes the sense of the owning
/// robot's in-corridor walk.
pub fn edge_direction(
    topo: &TopoMap,
    ctx: Option<&MappedRobot>,
    u: TopoVertexId,
    v: TopoVertexId,
) -> Option<(PassageId, Direction)> {
    let ku = topo.vertex(u).kind;
    let kv = topo.vertex(v).kind;
    match (ku.passage(), kv.passage()) {
        (Some(p), Some(q)) => {
            debug_assert_eq!(p, q, "structural edges never join two corridors");
            let split = ctx.and_then(|r| r.split).filter(|s| s.passage == p)?;
            let d = match ku {
                VertexKind::SplitIn(_) => split.direction,
                _ => split.direction.flip(),
            };
            Some((p, d))
        }
        (Some(p), None) => {
            // Leaving the corridor: toward `b` is AToB.
            let pass = topo.passage(p);
            let d = if v == pass.b { Direction::AToB } else { Direction::BToA };
            Some((p, d))
        }
        (None, Some(p)) => {
            // Entering the corridor: from `a` is AToB.
            let pass = topo.passage(p);
            let d = if u == pass.a { Direction::AToB } else { Direction::BToA };
            Some((p, d))
        }
        (None, None) => None,
    }
}

/// Per-passage travel senses used by one topological path.
pub fn path_directions(topo: &TopoMap, ctx: &MappedRobot, path: &[TopoVertexId]) -> Vec<(PassageId, Direction)> {
    let mut out = Vec::new();
    for pair in path.windows(2) {
        if let Some(use_) = edge_direction(topo, Some(ctx), pair[0], pair[1]) {
            out.push(use_);
        }
    }
    out
}

/// Folds the directions used by a set of paths into one direction per
/// passage. Returns `Err` with the offending passage when two paths (or two
/// segments of one path) commit a passage to both senses.
pub fn collect_directions(
    topo: &TopoMap,
    mapped: &MappedInstance,
    paths: &TopoPathSet,
) -> Result<PassageDirections, PassageId> {
    let mut dirs = PassageDirections::all_free(topo.passages.len());
    for path in &paths.paths {
        let ctx = mapped.robot(path.robot);
        for (p, d) in path_directions(topo, ctx, &path.vertices) {
            match dirs.get(p) {
                None => dirs.set(p, d),
                Some(prev) if prev == d => {}
                Some(_) => return Err(p),
            }
        }
    }
    Ok(dirs)
}
