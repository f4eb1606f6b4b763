//! Polynomial-time warm start: project endpoints to crossings, route every
//! robot while ignoring the others, orient the loop around each shelf to
//! spare the heaviest traffic, repair strong connectivity if the greedy
//! orientation broke it, then route everyone for real on the directed map.

use std::collections::{BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use crate::search::{shortest_path, DirectedView};
use crate::topo::{
    edge_direction, Direction, MappedInstance, PassageDirections, PassageId, TopoMap, TopoPath,
    TopoPathSet, TopoVertexId, VertexKind,
};

/// Traffic accumulated by the collision-ignoring plan. Keys are directed
/// vertex pairs with split copies folded onto the start-side copy, so loop
/// bookkeeping stays identical whether or not a corridor was split.
#[derive(Debug, Clone, Default)]
pub struct UsageStats {
    distance: HashMap<(TopoVertexId, TopoVertexId), u64>,
    users: HashMap<(TopoVertexId, TopoVertexId), BTreeSet<usize>>,
}

impl UsageStats {
    pub fn record(&mut self, edge: (TopoVertexId, TopoVertexId), robot: usize, weight: u64) {
        if self.users.entry(edge).or_default().insert(robot) {
            *self.distance.entry(edge).or_default() += weight;
        }
    }

    /// Total distance spent on this directed edge across robots.
    pub fn distance(&self, edge: (TopoVertexId, TopoVertexId)) -> u64 {
        self.distance.get(&edge).copied().unwrap_or(0)
    }

    pub fn used_by(&self, edge: (TopoVertexId, TopoVertexId), robot: usize) -> bool {
        self.users.get(&edge).is_some_and(|s| s.contains(&robot))
    }

    /// Robots using at least one of the given directed edges.
    pub fn robots_touching(&self, edges: &[(TopoVertexId, TopoVertexId)]) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for e in edges {
            if let Some(users) = self.users.get(e) {
                out.extend(users.iter().copied());
            }
        }
        out
    }
}

/// Folds a split goal-side copy onto its start-side twin.
fn canonical(topo: &TopoMap, v: TopoVertexId) -> TopoVertexId {
    match topo.vertex(v).kind {
        VertexKind::SplitOut(p) => topo.passage(p).primary_vertex(),
        _ => v,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProjectedEndpoints {
    pub robot: usize,
    pub start: TopoVertexId,
    pub goal: TopoVertexId,
}

/// Nearest crossing (Manhattan on cells) to each travelling robot's mapped
/// endpoints; ties go to the lexicographically smallest crossing cell.
pub fn project_to_crossings(topo: &TopoMap, mapped: &MappedInstance) -> Vec<ProjectedEndpoints> {
    let nearest = |v: TopoVertexId| -> TopoVertexId {
        let cell = topo.vertex(v).cell;
        *topo
            .crossings
            .iter()
            .min_by_key(|&&c| (cell.manhattan(topo.vertex(c).cell), topo.vertex(c).cell))
            .expect("maps have at least four crossings")
    };
    mapped
        .robots
        .iter()
        .filter(|ctx| !ctx.stationary)
        .map(|ctx| ProjectedEndpoints { robot: ctx.robot, start: nearest(ctx.start), goal: nearest(ctx.goal) })
        .collect()
}

/// Routes each robot between its projected crossings on the undirected map,
/// ignoring all other robots, and accumulates the per-edge usage stats.
/// Robots whose projections coincide contribute nothing.
pub fn initial_path_plan(
    topo: &TopoMap,
    projected: &[ProjectedEndpoints],
    ops: &mut u64,
) -> (UsageStats, TopoPathSet) {
    let free = PassageDirections::all_free(topo.passages.len());
    let view = DirectedView::free(topo, &free);
    let mut stats = UsageStats::default();
    let mut paths = Vec::with_capacity(projected.len());
    for pe in projected {
        if pe.start == pe.goal {
            paths.push(TopoPath { robot: pe.robot, vertices: vec![pe.start], cost: 0 });
            continue;
        }
        let res = shortest_path(&view, pe.start, pe.goal, true, None, ops)
            .expect("free warehouse maps are connected");
        for w in res.path.windows(2) {
            let (u, v) = (canonical(topo, w[0]), canonical(topo, w[1]));
            let weight = topo.vertex(u).cell.manhattan(topo.vertex(v).cell) as u64;
            stats.record((u, v), pe.robot, weight);
        }
        paths.push(TopoPath { robot: pe.robot, vertices: res.path, cost: res.cost });
    }
    (stats, TopoPathSet { paths })
}

/// The ring of corridors around one shelf.
#[derive(Debug, Clone)]
pub struct ShelfLoop {
    pub shelf: usize,
    pub row: usize,
    pub col: usize,
    /// Clockwise crossing/corridor cycle; nine entries, first = last.
    pub cycle: Vec<TopoVertexId>,
    /// Top, right, bottom, left.
    pub passages: [PassageId; 4],
    pub circumference: u64,
}

impl ShelfLoop {
    /// The eight directed edges of one orientation.
    pub fn edges(&self, clockwise: bool) -> Vec<(TopoVertexId, TopoVertexId)> {
        let fwd = self.cycle.windows(2).map(|w| (w[0], w[1]));
        if clockwise {
            fwd.collect()
        } else {
            fwd.map(|(a, b)| (b, a)).rev().collect()
        }
    }
}

/// One loop per shelf, ordered row-major.
pub fn enumerate_loops(topo: &TopoMap) -> Vec<ShelfLoop> {
    let grid = &topo.grid;
    let mut loops = Vec::new();
    for si in 0..grid.h_rows.len() - 1 {
        for sj in 0..grid.v_cols.len() - 1 {
            let (top, bottom) = (grid.h_rows[si], grid.h_rows[si + 1]);
            let (left, right) = (grid.v_cols[sj], grid.v_cols[sj + 1]);
            let at = |r, c| topo.crossing_at(crate::grid::GridVertex::new(r, c)).expect("crossing exists");
            let corridor =
                |r, c| topo.passage_at(crate::grid::GridVertex::new(r, c)).expect("corridor cell");
            let (tl, tr, br, bl) = (at(top, left), at(top, right), at(bottom, right), at(bottom, left));
            let p_top = corridor(top, left + 1);
            let p_right = corridor(top + 1, right);
            let p_bottom = corridor(bottom, left + 1);
            let p_left = corridor(top + 1, left);
            let prim = |p: PassageId| topo.passage(p).primary_vertex();
            let cycle = vec![
                tl,
                prim(p_top),
                tr,
                prim(p_right),
                br,
                prim(p_bottom),
                bl,
                prim(p_left),
                tl,
            ];
            let circumference = 2 * ((right - left) + (bottom - top)) as u64;
            loops.push(ShelfLoop {
                shelf: loops.len(),
                row: si,
                col: sj,
                cycle,
                passages: [p_top, p_right, p_bottom, p_left],
                circumference,
            });
        }
    }
    loops
}

/// Cost inflicted on this orientation's supporters if the loop were turned
/// the other way: every robot touching the orientation would pay the full
/// circumference instead of the distance it already spends here.
pub fn detour_cost(loop_: &ShelfLoop, clockwise: bool, stats: &UsageStats) -> u64 {
    let edges = loop_.edges(clockwise);
    let touching = stats.robots_touching(&edges).len() as u64;
    let spent: u64 = edges.iter().map(|&e| stats.distance(e)).sum();
    touching * loop_.circumference - spent
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrientationRule {
    /// Keep the orientation with the larger stake (default).
    ArgMax,
    /// Ablation switch: keep the smaller stake.
    ArgMin,
}

/// Fully oriented map plus the loop bookkeeping that produced it.
#[derive(Debug, Clone)]
pub struct DirectedTopoMap {
    pub directions: PassageDirections,
    pub loops: Vec<ShelfLoop>,
    /// Per loop: the larger orientation stake.
    pub stake: Vec<u64>,
    /// Per loop: chosen orientation, true = clockwise.
    pub clockwise: Vec<bool>,
    /// Loop indexes in claim order (stake descending, shelf id ascending).
    pub priority: Vec<usize>,
}

/// Applies loop orientations in priority order; the first loop to reach a
/// passage keeps it.
fn claim(topo: &TopoMap, loops: &[ShelfLoop], clockwise: &[bool], priority: &[usize]) -> PassageDirections {
    let mut dirs = PassageDirections::all_free(topo.passages.len());
    for &i in priority {
        for (u, v) in loops[i].edges(clockwise[i]) {
            let (p, d) = edge_direction(topo, None, u, v).expect("loop edges are corridors");
            if dirs.get(p).is_none() {
                dirs.set(p, d);
            }
        }
    }
    debug_assert_eq!(dirs.fixed_count(), topo.passages.len(), "every corridor borders a shelf");
    dirs
}

/// Orients every passage: each loop picks the orientation protecting the
/// larger stake, and loops claim their passages in descending-stake order so
/// heavier traffic wins shared corridors.
pub fn one_way_regulation(
    topo: &TopoMap,
    loops: Vec<ShelfLoop>,
    stats: &UsageStats,
    rule: OrientationRule,
    ops: &mut u64,
) -> DirectedTopoMap {
    let mut stake = Vec::with_capacity(loops.len());
    let mut clockwise = Vec::with_capacity(loops.len());
    for l in &loops {
        let cw = detour_cost(l, true, stats);
        let ccw = detour_cost(l, false, stats);
        *ops += 16;
        stake.push(cw.max(ccw));
        let keep_cw = match rule {
            OrientationRule::ArgMax => cw >= ccw,
            OrientationRule::ArgMin => cw <= ccw,
        };
        clockwise.push(keep_cw);
    }
    let mut priority: Vec<usize> = (0..loops.len()).collect();
    priority.sort_by_key(|&i| (std::cmp::Reverse(stake[i]), loops[i].shelf));
    let directions = claim(topo, &loops, &clockwise, &priority);
    DirectedTopoMap { directions, loops, stake, clockwise, priority }
}

/// Two sweeps (forward and reversed) from vertex 0 over the directed map.
/// Free passages count as open both ways; split direct edges are ignored
/// since they belong to single robots.
pub fn is_strongly_connected(topo: &TopoMap, dirs: &PassageDirections, ops: &mut u64) -> bool {
    let n = topo.vertex_count();
    let mut fwd: Vec<Vec<TopoVertexId>> = vec![Vec::new(); n];
    let mut rev: Vec<Vec<TopoVertexId>> = vec![Vec::new(); n];
    for p in &topo.passages {
        for copy in p.copies() {
            if dirs.allows(p.id, Direction::AToB) {
                fwd[p.a.0].push(copy);
                rev[copy.0].push(p.a);
                fwd[copy.0].push(p.b);
                rev[p.b.0].push(copy);
            }
            if dirs.allows(p.id, Direction::BToA) {
                fwd[p.b.0].push(copy);
                rev[copy.0].push(p.b);
                fwd[copy.0].push(p.a);
                rev[p.a.0].push(copy);
            }
        }
    }
    let full_sweep = |adj: &[Vec<TopoVertexId>], ops: &mut u64| -> bool {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([TopoVertexId(0)]);
        seen[0] = true;
        let mut count = 0usize;
        while let Some(v) = queue.pop_front() {
            count += 1;
            *ops += 1;
            for &to in &adj[v.0] {
                *ops += 1;
                if !seen[to.0] {
                    seen[to.0] = true;
                    queue.push_back(to);
                }
            }
        }
        count == n
    };
    full_sweep(&fwd, ops) && full_sweep(&rev, ops)
}

/// Checkerboard orientation: clockwise on even shelf parity. Adjacent loops
/// then agree on every shared corridor, each loop is a directed cycle, and
/// neighbouring cycles share vertices, so the whole map is strongly
/// connected.
pub fn checkerboard_directions(topo: &TopoMap, loops: &[ShelfLoop]) -> PassageDirections {
    let clockwise: Vec<bool> = loops.iter().map(|l| (l.row + l.col) % 2 == 0).collect();
    let priority: Vec<usize> = (0..loops.len()).collect();
    claim(topo, loops, &clockwise, &priority)
}

/// Keeps the greedy orientation when it is already strongly connected.
/// Otherwise flips the lowest-stake loops, one more each attempt, and falls
/// back to the checkerboard orientation, which always works.
pub fn repair_connectivity(topo: &TopoMap, dmap: DirectedTopoMap, ops: &mut u64) -> DirectedTopoMap {
    if is_strongly_connected(topo, &dmap.directions, ops) {
        return dmap;
    }
    let mut ascending: Vec<usize> = (0..dmap.loops.len()).collect();
    ascending.sort_by_key(|&i| (dmap.stake[i], dmap.loops[i].shelf));
    for k in 1..=ascending.len() {
        let mut clockwise = dmap.clockwise.clone();
        for &i in &ascending[..k] {
            clockwise[i] = !clockwise[i];
        }
        let directions = claim(topo, &dmap.loops, &clockwise, &dmap.priority);
        if is_strongly_connected(topo, &directions, ops) {
            return DirectedTopoMap { directions, clockwise, ..dmap };
        }
    }
    let clockwise: Vec<bool> = dmap.loops.iter().map(|l| (l.row + l.col) % 2 == 0).collect();
    let directions = checkerboard_directions(topo, &dmap.loops);
    let mut check = 0u64;
    debug_assert!(is_strongly_connected(topo, &directions, &mut check));
    DirectedTopoMap { directions, clockwise, ..dmap }
}

/// Routes every robot between its true mapped endpoints on the directed
/// map. Stationary robots keep their single-vertex routes.
pub fn final_path_plan(
    topo: &TopoMap,
    mapped: &MappedInstance,
    dirs: &PassageDirections,
    ops: &mut u64,
) -> TopoPathSet {
    let mut paths = Vec::with_capacity(mapped.robots.len());
    for ctx in &mapped.robots {
        if ctx.stationary {
            paths.push(TopoPath { robot: ctx.robot, vertices: vec![ctx.start], cost: 0 });
            continue;
        }
        let view = DirectedView { topo, dirs, robot: Some(ctx) };
        let res = shortest_path(&view, ctx.start, ctx.goal, true, None, ops)
            .expect("repaired maps are strongly connected");
        paths.push(TopoPath { robot: ctx.robot, vertices: res.path, cost: res.cost });
    }
    TopoPathSet { paths }
}

#[derive(Debug, Clone)]
pub struct WarmStart {
    pub paths: TopoPathSet,
    /// One direction per passage.
    pub directions: PassageDirections,
    /// Queue pops, edge relaxations and sweep visits spent producing it.
    pub ops: u64,
}

/// The full warm-start pipeline.
pub fn warm_start(topo: &TopoMap, mapped: &MappedInstance, rule: OrientationRule) -> WarmStart {
    let mut ops = 0u64;
    let projected = project_to_crossings(topo, mapped);
    ops += (projected.len() * 2 * topo.crossings.len()) as u64;
    let (stats, _ignore_others) = initial_path_plan(topo, &projected, &mut ops);
    let loops = enumerate_loops(topo);
    let regulated = one_way_regulation(topo, loops, &stats, rule, &mut ops);
    let repaired = repair_connectivity(topo, regulated, &mut ops);
    let paths = final_path_plan(topo, mapped, &repaired.directions, &mut ops);
    WarmStart { paths, directions: repaired.directions, ops }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WarmStartParseError {
    #[error("line {line}: expected `robot <id>: v v ...` or `passage <id>: <dir>`")]
    Malformed { line: usize },
    #[error("line {line}: unknown vertex {name:?}")]
    UnknownVertex { line: usize, name: String },
    #[error("line {line}: unknown passage {id}")]
    UnknownPassage { line: usize, id: usize },
    #[error("line {line}: direction must be a_to_b or b_to_a, got {got:?}")]
    BadDirection { line: usize, got: String },
}

/// Text form: one `robot <id>: <vertex names>` line per route, then one
/// `passage <id>: <direction>` line per oriented passage.
pub fn dump_warmstart(topo: &TopoMap, ws: &WarmStart) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    for p in &ws.paths.paths {
        let names: Vec<String> = p.vertices.iter().map(|&v| topo.vertex_name(v)).collect();
        let _ = writeln!(out, "robot {}: {}", p.robot, names.join(" "));
    }
    for p in &topo.passages {
        if let Some(d) = ws.directions.get(p.id) {
            let _ = writeln!(out, "passage {}: {}", p.id.0, d.as_str());
        }
    }
    out
}

pub fn parse_warmstart(topo: &TopoMap, text: &str) -> Result<WarmStart, WarmStartParseError> {
    let names: HashMap<String, TopoVertexId> = (0..topo.vertex_count())
        .map(TopoVertexId)
        .map(|v| (topo.vertex_name(v), v))
        .collect();
    let mut paths = Vec::new();
    let mut directions = PassageDirections::all_free(topo.passages.len());
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let malformed = || WarmStartParseError::Malformed { line };
        let (head, rest) = trimmed.split_once(':').ok_or_else(malformed)?;
        let rest = rest.trim();
        if let Some(id) = head.strip_prefix("robot ") {
            let robot: usize = id.trim().parse().map_err(|_| malformed())?;
            let mut vertices = Vec::new();
            for name in rest.split_whitespace() {
                let v = *names.get(name).ok_or(WarmStartParseError::UnknownVertex {
                    line,
                    name: name.to_string(),
                })?;
                vertices.push(v);
            }
            if vertices.is_empty() {
                return Err(malformed());
            }
            let cost = vertices
                .windows(2)
                .map(|w| topo.vertex(w[0]).cell.manhattan(topo.vertex(w[1]).cell) as u32)
                .sum();
            paths.push(TopoPath { robot, vertices, cost });
        } else if let Some(id) = head.strip_prefix("passage ") {
            let id: usize = id.trim().parse().map_err(|_| malformed())?;
            if id >= topo.passages.len() {
                return Err(WarmStartParseError::UnknownPassage { line, id });
            }
            let dir = match rest {
                "a_to_b" => Direction::AToB,
                "b_to_a" => Direction::BToA,
                other => return Err(WarmStartParseError::BadDirection { line, got: other.to_string() }),
            };
            directions.set(PassageId(id), dir);
        } else {
            return Err(malformed());
        }
    }
    Ok(WarmStart { paths: TopoPathSet { paths }, directions, ops: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridMap, GridVertex, Instance, Robot};
    use crate::topo::{extract_topo, map_endpoints, split_identical_endpoints, ObjectiveKind};

    fn fig1() -> GridMap {
        GridMap::new(7, 13, vec![1, 4, 7], vec![1, 7, 13]).unwrap()
    }

    fn setup(map: &GridMap, robots: Vec<Robot>) -> (TopoMap, MappedInstance) {
        let topo = extract_topo(map);
        let inst = Instance { robots, seed: 0 };
        let mapped = map_endpoints(&topo, &inst);
        split_identical_endpoints(&topo, &mapped)
    }

    fn cell(topo: &TopoMap, v: TopoVertexId) -> GridVertex {
        topo.vertex(v).cell
    }

    #[test]
    fn projection_picks_the_nearest_crossing_with_lexicographic_ties() {
        let (topo, mapped) = setup(
            &fig1(),
            vec![
                // Maps to corridor vertex (1,4): 3 cells from both (1,1) and (1,7).
                Robot { id: 0, start: GridVertex::new(1, 3), goal: GridVertex::new(7, 13) },
                // Maps to corridor vertex (2,7): 1 cell from (1,7), 2 from (4,7).
                Robot { id: 1, start: GridVertex::new(3, 7), goal: GridVertex::new(1, 1) },
            ],
        );
        let projected = project_to_crossings(&topo, &mapped);
        assert_eq!(cell(&topo, projected[0].start), GridVertex::new(1, 1), "tie resolved low");
        assert_eq!(cell(&topo, projected[0].goal), GridVertex::new(7, 13), "crossings stay put");
        assert_eq!(cell(&topo, projected[1].start), GridVertex::new(1, 7));
    }

    #[test]
    fn initial_plan_accumulates_distance_and_users_per_directed_edge() {
        let (topo, mapped) = setup(
            &fig1(),
            vec![
                Robot { id: 0, start: GridVertex::new(1, 1), goal: GridVertex::new(1, 7) },
                Robot { id: 1, start: GridVertex::new(1, 1), goal: GridVertex::new(1, 7) },
            ],
        );
        let projected = project_to_crossings(&topo, &mapped);
        let mut ops = 0;
        let (stats, paths) = initial_path_plan(&topo, &projected, &mut ops);
        let c11 = topo.crossing_at(GridVertex::new(1, 1)).unwrap();
        let c17 = topo.crossing_at(GridVertex::new(1, 7)).unwrap();
        let vp = topo.passage(topo.passage_at(GridVertex::new(1, 4)).unwrap()).primary_vertex();
        for robot in [0usize, 1] {
            assert!(stats.used_by((c11, vp), robot), "robot {robot} uses the first hop");
            assert!(stats.used_by((vp, c17), robot));
        }
        assert_eq!(stats.distance((c11, vp)), 6, "two robots, three cells each");
        assert_eq!(stats.distance((vp, c17)), 6);
        assert_eq!(stats.distance((c17, vp)), 0, "reverse sense untouched");
        assert_eq!(paths.paths.len(), 2);
        assert!(ops > 0);
    }

    #[test]
    fn coinciding_projections_leave_the_stats_untouched() {
        let (topo, mapped) = setup(
            &fig1(),
            // Both endpoints live in the top-left corridor, so both map to
            // its split copies at (1,4) and project to the same crossing.
            vec![Robot { id: 0, start: GridVertex::new(1, 2), goal: GridVertex::new(1, 3) }],
        );
        let projected = project_to_crossings(&topo, &mapped);
        let mut ops = 0;
        let (stats, paths) = initial_path_plan(&topo, &projected, &mut ops);
        assert_eq!(projected[0].start, projected[0].goal);
        assert!(stats.distance.is_empty());
        assert_eq!(paths.paths[0].vertices.len(), 1);
    }

    #[test]
    fn loops_have_nine_entries_and_the_expected_circumference() {
        let (topo, _) = setup(&fig1(), vec![]);
        let loops = enumerate_loops(&topo);
        assert_eq!(loops.len(), 4);
        let l = &loops[0];
        assert_eq!(l.cycle.len(), 9);
        assert_eq!(l.cycle.first(), l.cycle.last());
        assert_eq!(l.circumference, 18);
        let corners: Vec<GridVertex> = [0, 2, 4, 6].iter().map(|&i| cell(&topo, l.cycle[i])).collect();
        assert_eq!(
            corners,
            vec![GridVertex::new(1, 1), GridVertex::new(1, 7), GridVertex::new(4, 7), GridVertex::new(4, 1)]
        );
        // Orientations are mutual reverses.
        let cw = l.edges(true);
        let mut ccw = l.edges(false);
        ccw.reverse();
        let flipped: Vec<_> = ccw.into_iter().map(|(a, b)| (b, a)).collect();
        assert_eq!(cw, flipped);
        let weight_sum: u64 = cw.iter().map(|&(a, b)| cell(&topo, a).manhattan(cell(&topo, b)) as u64).sum();
        assert_eq!(weight_sum, l.circumference);
    }

    #[test]
    fn detour_cost_matches_hand_evaluation() {
        let (topo, mapped) = setup(
            &fig1(),
            vec![Robot { id: 0, start: GridVertex::new(1, 1), goal: GridVertex::new(1, 7) }],
        );
        let projected = project_to_crossings(&topo, &mapped);
        let mut ops = 0;
        let (stats, _) = initial_path_plan(&topo, &projected, &mut ops);
        let loops = enumerate_loops(&topo);
        assert_eq!(detour_cost(&loops[0], true, &stats), 12, "one supporter, 18 - 6");
        assert_eq!(detour_cost(&loops[0], false, &stats), 0);

        let untouched = &loops[3];
        assert_eq!(detour_cost(untouched, true, &stats), 0);
        assert_eq!(detour_cost(untouched, false, &stats), 0);
    }

    #[test]
    fn detour_cost_with_opposing_supporters() {
        let (topo, _) = setup(&fig1(), vec![]);
        let loops = enumerate_loops(&topo);
        let loop0 = &loops[0];
        let weight = |e: (TopoVertexId, TopoVertexId)| cell(&topo, e.0).manhattan(cell(&topo, e.1)) as u64;

        // Robot 0 rides clockwise for 12 cells (top, right, half the
        // bottom); robot 1 rides counterclockwise for 6 (the top, backwards).
        let mut stats = UsageStats::default();
        let cw = loop0.edges(true);
        for &e in &cw[..5] {
            stats.record(e, 0, weight(e));
        }
        let ccw = loop0.edges(false);
        for &e in &ccw[6..] {
            stats.record(e, 1, weight(e));
        }
        assert_eq!(cw[..5].iter().map(|&e| weight(e)).sum::<u64>(), 12);
        assert_eq!(ccw[6..].iter().map(|&e| weight(e)).sum::<u64>(), 6);

        assert_eq!(detour_cost(loop0, true, &stats), 6, "18 - 12");
        assert_eq!(detour_cost(loop0, false, &stats), 12, "18 - 6");
    }

    #[test]
    fn regulation_orients_a_loop_behind_its_heaviest_traffic() {
        let map = GridMap::new(4, 4, vec![1, 4], vec![1, 4]).unwrap();
        let (topo, mapped) = setup(
            &map,
            vec![Robot { id: 0, start: GridVertex::new(1, 1), goal: GridVertex::new(1, 4) }],
        );
        let projected = project_to_crossings(&topo, &mapped);
        let mut ops = 0;
        let (stats, _) = initial_path_plan(&topo, &projected, &mut ops);
        let loops = enumerate_loops(&topo);
        let dmap = one_way_regulation(&topo, loops, &stats, OrientationRule::ArgMax, &mut ops);
        assert!(dmap.clockwise[0], "the robot travels the top corridor clockwise");
        assert_eq!(dmap.directions.fixed_count(), 4);
        // Clockwise ring: top and right run a->b, bottom and left run b->a.
        let [top, right, bottom, left] = dmap.loops[0].passages;
        assert_eq!(dmap.directions.get(top), Some(Direction::AToB));
        assert_eq!(dmap.directions.get(right), Some(Direction::AToB));
        assert_eq!(dmap.directions.get(bottom), Some(Direction::BToA));
        assert_eq!(dmap.directions.get(left), Some(Direction::BToA));

        let flipped = one_way_regulation(
            &topo,
            enumerate_loops(&topo),
            &stats,
            OrientationRule::ArgMin,
            &mut ops,
        );
        assert!(!flipped.clockwise[0], "the ablation rule inverts the choice");
    }

    #[test]
    fn shared_passages_go_to_the_higher_stake_loop() {
        // Three robots push shelf 0 clockwise, one pushes shelf 1 clockwise.
        // Shelf 0's right side and shelf 1's left side are the same passage,
        // and the two clockwise orientations disagree on it.
        let (topo, _) = setup(&fig1(), vec![]);
        let loops = enumerate_loops(&topo);
        let shared = loops[0].passages[1];
        assert_eq!(shared, loops[1].passages[3], "same corridor seen from both shelves");

        let mut stats = UsageStats::default();
        let top0 = &loops[0].edges(true)[..2];
        for robot in 0..3 {
            for &e in top0 {
                stats.record(e, robot, 3);
            }
        }
        let top1 = &loops[1].edges(true)[..2];
        for &e in top1 {
            stats.record(e, 3, 3);
        }
        let d0 = detour_cost(&loops[0], true, &stats);
        let d1 = detour_cost(&loops[1], true, &stats);
        assert_eq!((d0, d1), (3 * 18 - 18, 18 - 6), "shelf 0 carries more stake");

        let mut ops = 0;
        let dmap = one_way_regulation(&topo, loops, &stats, OrientationRule::ArgMax, &mut ops);
        assert!(dmap.clockwise[0] && dmap.clockwise[1], "both loops stay clockwise");
        assert_eq!(
            dmap.directions.get(shared),
            Some(Direction::AToB),
            "downward, as shelf 0's clockwise right side demands"
        );
        // Shelf 1 keeps its three unshared corridors clockwise regardless.
        let [top, right, bottom, left] = dmap.loops[1].passages;
        assert_eq!(left, shared);
        assert_eq!(dmap.directions.get(top), Some(Direction::AToB));
        assert_eq!(dmap.directions.get(right), Some(Direction::AToB));
        assert_eq!(dmap.directions.get(bottom), Some(Direction::BToA));
    }

    #[test]
    fn regulation_with_no_traffic_still_orients_everything() {
        let (topo, _) = setup(&fig1(), vec![]);
        let loops = enumerate_loops(&topo);
        let mut ops = 0;
        let dmap = one_way_regulation(&topo, loops, &UsageStats::default(), OrientationRule::ArgMax, &mut ops);
        assert_eq!(dmap.directions.fixed_count(), topo.passages.len());
        assert!(dmap.clockwise.iter().all(|&c| c), "ties default to clockwise");
        assert_eq!(dmap.stake, vec![0; 4]);
    }

    #[test]
    fn connectivity_check_and_checkerboard_agree_on_known_cases() {
        let (topo, _) = setup(&fig1(), vec![]);
        let mut ops = 0;
        let free = PassageDirections::all_free(topo.passages.len());
        assert!(is_strongly_connected(&topo, &free, &mut ops));

        let loops = enumerate_loops(&topo);
        let board = checkerboard_directions(&topo, &loops);
        assert_eq!(board.fixed_count(), topo.passages.len());
        assert!(is_strongly_connected(&topo, &board, &mut ops));

        // Point both of the top-left crossing's corridors inward: nothing
        // can leave it, so the sweep must fail.
        let mut dead_end = board.clone();
        let c11 = topo.crossing_at(GridVertex::new(1, 1)).unwrap();
        for p in &topo.passages {
            if p.a == c11 {
                dead_end.set(p.id, Direction::BToA);
            } else if p.b == c11 {
                dead_end.set(p.id, Direction::AToB);
            }
        }
        assert!(!is_strongly_connected(&topo, &dead_end, &mut ops));
    }

    #[test]
    fn repair_keeps_connected_maps_and_fixes_broken_ones() {
        let (topo, _) = setup(&fig1(), vec![]);
        let loops = enumerate_loops(&topo);
        let mut ops = 0;
        let dmap = one_way_regulation(&topo, loops, &UsageStats::default(), OrientationRule::ArgMax, &mut ops);
        let before = dmap.directions.clone();
        let connected = is_strongly_connected(&topo, &before, &mut ops);
        let repaired = repair_connectivity(&topo, dmap, &mut ops);
        if connected {
            assert_eq!(repaired.directions, before, "already-good maps pass through");
        }
        assert!(is_strongly_connected(&topo, &repaired.directions, &mut ops));

        // Sabotage: make the top-left crossing a sink and let repair dig out.
        let mut broken = repaired.clone();
        let c11 = topo.crossing_at(GridVertex::new(1, 1)).unwrap();
        for p in &topo.passages {
            if p.a == c11 {
                broken.directions.set(p.id, Direction::BToA);
            } else if p.b == c11 {
                broken.directions.set(p.id, Direction::AToB);
            }
        }
        assert!(!is_strongly_connected(&topo, &broken.directions, &mut ops));
        let fixed = repair_connectivity(&topo, broken, &mut ops);
        assert!(is_strongly_connected(&topo, &fixed.directions, &mut ops));
    }

    #[test]
    fn final_routes_leave_with_the_corridor_direction_and_circle_back() {
        let (topo, mapped) = setup(
            &fig1(),
            // Start inside the top-left corridor, goal at its left end. All
            // ties default clockwise, so the corridor points right.
            vec![Robot { id: 0, start: GridVertex::new(1, 3), goal: GridVertex::new(1, 1) }],
        );
        let ws = warm_start(&topo, &mapped, OrientationRule::ArgMax);
        let path = &ws.paths.paths[0];
        assert_eq!(cell(&topo, path.vertices[0]), GridVertex::new(1, 4));
        assert_eq!(cell(&topo, path.vertices[1]), GridVertex::new(1, 7), "forced out the wrong way");
        assert_eq!(cell(&topo, *path.vertices.last().unwrap()), GridVertex::new(1, 1));
        assert!(path.cost > 6, "the detour is longer than the direct walk");
    }

    #[test]
    fn warm_start_feeds_the_exact_solver_and_the_model() {
        let robots = vec![
            Robot { id: 0, start: GridVertex::new(1, 1), goal: GridVertex::new(1, 13) },
            Robot { id: 1, start: GridVertex::new(1, 13), goal: GridVertex::new(1, 1) },
            Robot { id: 2, start: GridVertex::new(7, 1), goal: GridVertex::new(4, 7) },
        ];
        let (topo, mapped) = setup(&fig1(), robots);
        let ws = warm_start(&topo, &mapped, OrientationRule::ArgMax);
        assert!(ws.ops > 0);

        let model = crate::ip::build_model(&topo, &mapped, ObjectiveKind::Total, false);
        let asg = crate::ip::encode_warmstart(&model, &ws.paths).unwrap();
        assert!(crate::ip::evaluate_assignment(&model, &asg).is_empty());

        let warm = crate::bnb::solve(
            &topo,
            &mapped,
            &crate::bnb::SolveOptions { incumbent: Some(ws.paths.clone()), ..Default::default() },
        )
        .unwrap();
        assert!(warm.optimal);
        assert!(warm.objective <= ws.paths.objective(ObjectiveKind::Total));
    }

    #[test]
    fn warm_start_dump_parses_back_to_the_same_plan() {
        let (topo, mapped) = setup(
            &fig1(),
            vec![
                Robot { id: 0, start: GridVertex::new(1, 1), goal: GridVertex::new(7, 13) },
                Robot { id: 1, start: GridVertex::new(4, 13), goal: GridVertex::new(1, 3) },
            ],
        );
        let ws = warm_start(&topo, &mapped, OrientationRule::ArgMax);
        let text = dump_warmstart(&topo, &ws);
        let back = parse_warmstart(&topo, &text).unwrap();
        assert_eq!(back.paths.paths, ws.paths.paths);
        assert_eq!(back.directions, ws.directions);

        assert!(matches!(
            parse_warmstart(&topo, "robot 0: c1_1 nope"),
            Err(WarmStartParseError::UnknownVertex { .. })
        ));
        assert!(matches!(
            parse_warmstart(&topo, "passage 99: a_to_b"),
            Err(WarmStartParseError::UnknownPassage { .. })
        ));
        assert!(matches!(
            parse_warmstart(&topo, "passage 0: sideways"),
            Err(WarmStartParseError::BadDirection { .. })
        ));
    }
}
