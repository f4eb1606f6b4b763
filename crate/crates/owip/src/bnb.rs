//! Exact solver: branch and bound over passage directions.
//!
//! Once every passage has a single direction, robots no longer interact and
//! each one takes an independent directed shortest path, so a node of the
//! search tree is scored by routing every robot over its current partial
//! assignment (free passages open both ways). That score is a valid lower
//! bound, because fixing a passage only removes edges. A node whose relaxed
//! routes already agree on every passage direction is feasible outright and,
//! popped best-bound-first, optimal.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, BTreeSet};
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::search::{shortest_path, DirectedView, SearchResult};
use crate::topo::{
    edge_direction, Direction, MappedInstance, MappedRobot, ObjectiveKind, PassageDirections,
    PassageId, TopoMap, TopoPath, TopoPathSet, TopoVertexId,
};

/// Passage count above which exhaustive enumeration is refused.
pub const BRUTE_FORCE_CAP: usize = 16;

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub objective: ObjectiveKind,
    /// Feasible plan used as the starting incumbent.
    pub incumbent: Option<TopoPathSet>,
    pub budget: Option<Duration>,
    /// Prefer less-crowded vertices among equal-cost routes.
    pub congestion_bias: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { objective: ObjectiveKind::Total, incumbent: None, budget: None, congestion_bias: false }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub paths: TopoPathSet,
    /// Directions the routes rely on; passages nobody uses stay free.
    pub directions: PassageDirections,
    pub objective: u32,
    /// Best proved lower bound; equals `objective` when `optimal`.
    pub bound: u32,
    pub optimal: bool,
    /// Relaxations evaluated, including pruned and unreachable ones.
    pub nodes: u64,
    pub wall: Duration,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub objective: u32,
    pub bound: u32,
    pub nodes: u64,
    pub time_ms: u64,
    pub optimal: bool,
}

impl Solution {
    pub fn report(&self) -> SolveReport {
        SolveReport {
            objective: self.objective,
            bound: self.bound,
            nodes: self.nodes,
            time_ms: self.wall.as_millis() as u64,
            optimal: self.optimal,
        }
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("no feasible routing exists for this instance")]
    Infeasible,
    #[error("budget exhausted before any feasible routing was found")]
    BudgetExhausted,
    #[error("{passages} passages exceed the exhaustive-enumeration cap of {cap}")]
    TooLarge { passages: usize, cap: usize },
    #[error("starting incumbent rejected: {0}")]
    InvalidIncumbent(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("no directed route from vertex {from} to vertex {to}")]
pub struct Unreachable {
    pub from: usize,
    pub to: usize,
}

/// Shortest path for one robot under a direction assignment.
pub fn directed_shortest_path(
    topo: &TopoMap,
    dirs: &PassageDirections,
    robot: Option<&MappedRobot>,
    from: TopoVertexId,
    to: TopoVertexId,
) -> Result<SearchResult, Unreachable> {
    let view = DirectedView { topo, dirs, robot };
    let mut ops = 0;
    shortest_path(&view, from, to, true, None, &mut ops).ok_or(Unreachable { from: from.0, to: to.0 })
}

struct Eval {
    bound: u32,
    paths: TopoPathSet,
    /// Smallest-id free passage the routes cross in both senses.
    conflict: Option<PassageId>,
    /// Node assignment plus the senses the routes actually used.
    directions: PassageDirections,
}

/// Routes every robot over the partial assignment. `None` when some robot
/// cannot reach its goal at all under this node.
fn evaluate_node(
    topo: &TopoMap,
    mapped: &MappedInstance,
    dirs: &PassageDirections,
    objective: ObjectiveKind,
    congestion_bias: bool,
    ops: &mut u64,
) -> Option<Eval> {
    let mut paths = Vec::with_capacity(mapped.robots.len());
    let mut usage = vec![0u32; topo.vertex_count()];
    for ctx in &mapped.robots {
        if ctx.stationary {
            paths.push(TopoPath { robot: ctx.robot, vertices: vec![ctx.start], cost: 0 });
            continue;
        }
        let view = DirectedView { topo, dirs, robot: Some(ctx) };
        let bias = if congestion_bias { Some(usage.as_slice()) } else { None };
        let res = shortest_path(&view, ctx.start, ctx.goal, true, bias, ops)?;
        for &v in &res.path {
            usage[v.0] += 1;
        }
        paths.push(TopoPath { robot: ctx.robot, vertices: res.path, cost: res.cost });
    }
    let paths = TopoPathSet { paths };
    let bound = paths.objective(objective);

    let mut merged = dirs.clone();
    let mut conflicts: BTreeSet<PassageId> = BTreeSet::new();
    for path in &paths.paths {
        let ctx = mapped.robot(path.robot);
        for w in path.vertices.windows(2) {
            let (p, d) = edge_direction(topo, Some(ctx), w[0], w[1]).expect("route steps are edges");
            match merged.get(p) {
                None => merged.set(p, d),
                Some(existing) if existing != d => {
                    conflicts.insert(p);
                }
                Some(_) => {}
            }
        }
    }
    Some(Eval { bound, paths, conflict: conflicts.into_iter().next(), directions: merged })
}

struct OpenNode {
    bound: u32,
    depth: u32,
    fixed: usize,
    seq: u64,
    dirs: PassageDirections,
    conflict: PassageId,
}

impl OpenNode {
    fn key(&self) -> (u32, u32, usize, u64) {
        (self.bound, self.depth, self.fixed, self.seq)
    }
}

impl PartialEq for OpenNode {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}
impl Eq for OpenNode {}
impl PartialOrd for OpenNode {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OpenNode {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key().cmp(&other.key())
    }
}

/// Validates a caller-supplied plan and recomputes its objective.
fn check_incumbent(
    topo: &TopoMap,
    mapped: &MappedInstance,
    plan: &TopoPathSet,
    objective: ObjectiveKind,
) -> Result<(u32, TopoPathSet, PassageDirections), SolveError> {
    let bad = |msg: String| SolveError::InvalidIncumbent(msg);
    for p in &plan.paths {
        if mapped.robots.iter().all(|m| m.robot != p.robot) {
            return Err(bad(format!("route for unknown robot {}", p.robot)));
        }
    }
    let mut dirs = PassageDirections::all_free(topo.passages.len());
    let mut paths = Vec::with_capacity(mapped.robots.len());
    for ctx in &mapped.robots {
        if ctx.stationary {
            paths.push(TopoPath { robot: ctx.robot, vertices: vec![ctx.start], cost: 0 });
            continue;
        }
        let Some(path) = plan.paths.iter().find(|p| p.robot == ctx.robot) else {
            return Err(bad(format!("no route for robot {}", ctx.robot)));
        };
        let vs = &path.vertices;
        if vs.first() != Some(&ctx.start) || vs.last() != Some(&ctx.goal) {
            return Err(bad(format!("robot {} route endpoints do not match", ctx.robot)));
        }
        let mut cost = 0u32;
        for w in vs.windows(2) {
            let Some((p, d)) = edge_direction(topo, Some(ctx), w[0], w[1]) else {
                return Err(bad(format!("robot {} step {} -> {} is not an edge", ctx.robot, w[0].0, w[1].0)));
            };
            match dirs.get(p) {
                None => dirs.set(p, d),
                Some(existing) if existing != d => {
                    return Err(bad(format!("passage {p} travelled in both senses")));
                }
                Some(_) => {}
            }
            cost += topo.vertex(w[0]).cell.manhattan(topo.vertex(w[1]).cell) as u32;
        }
        paths.push(TopoPath { robot: ctx.robot, vertices: vs.clone(), cost });
    }
    let paths = TopoPathSet { paths };
    let objective = paths.objective(objective);
    Ok((objective, paths, dirs))
}

/// Exact search. Returns the optimum unless the budget runs out first, in
/// which case the best incumbent comes back with `optimal = false`.
pub fn solve(topo: &TopoMap, mapped: &MappedInstance, opts: &SolveOptions) -> Result<Solution, SolveError> {
    let t0 = Instant::now();
    let deadline = opts.budget.map(|b| t0 + b);
    let mut ops = 0u64;
    let mut nodes = 0u64;
    let mut seq = 0u64;

    let mut best: Option<(u32, TopoPathSet, PassageDirections)> = None;
    if let Some(plan) = &opts.incumbent {
        best = Some(check_incumbent(topo, mapped, plan, opts.objective)?);
    }
    let improves = |bound: u32, best: &Option<(u32, TopoPathSet, PassageDirections)>| {
        best.as_ref().is_none_or(|(inc, _, _)| bound < *inc)
    };

    let free = PassageDirections::all_free(topo.passages.len());
    nodes += 1;
    let Some(root) = evaluate_node(topo, mapped, &free, opts.objective, opts.congestion_bias, &mut ops) else {
        return Err(SolveError::Infeasible);
    };

    let mut heap: BinaryHeap<Reverse<OpenNode>> = BinaryHeap::new();
    let mut proved = false;
    let mut drained = false;
    let mut frontier: Option<u32> = None;
    match root.conflict {
        None => {
            // The root bound is a global lower bound; hitting it feasibly
            // settles the instance outright.
            if improves(root.bound, &best) {
                best = Some((root.bound, root.paths, root.directions));
            }
            proved = true;
        }
        Some(_) if !improves(root.bound, &best) => proved = true,
        Some(conflict) => {
            heap.push(Reverse(OpenNode { bound: root.bound, depth: 0, fixed: 0, seq, dirs: free, conflict }));
            seq += 1;
        }
    }

    while !proved {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            frontier = heap.peek().map(|Reverse(n)| n.bound);
            break;
        }
        let Some(Reverse(node)) = heap.pop() else {
            // Every branch was settled or pruned against the incumbent.
            proved = best.is_some();
            drained = true;
            break;
        };
        if !improves(node.bound, &best) {
            // Best-bound order: everything else still open is no better.
            proved = true;
            break;
        }
        for dir in [Direction::AToB, Direction::BToA] {
            let mut dirs = node.dirs.clone();
            dirs.set(node.conflict, dir);
            nodes += 1;
            let Some(child) = evaluate_node(topo, mapped, &dirs, opts.objective, opts.congestion_bias, &mut ops)
            else {
                continue;
            };
            debug_assert!(child.bound >= node.bound, "restricting edges cannot shrink the bound");
            match child.conflict {
                None => {
                    if improves(child.bound, &best) {
                        best = Some((child.bound, child.paths, child.directions));
                    }
                }
                Some(conflict) => {
                    if improves(child.bound, &best) {
                        heap.push(Reverse(OpenNode {
                            bound: child.bound,
                            depth: node.depth + 1,
                            fixed: node.conflict.0,
                            seq,
                            dirs,
                            conflict,
                        }));
                        seq += 1;
                    }
                }
            }
        }
    }

    match best {
        Some((objective, paths, directions)) => {
            let bound = if proved { objective } else { frontier.unwrap_or(objective).min(objective) };
            Ok(Solution { paths, directions, objective, bound, optimal: proved, nodes, wall: t0.elapsed() })
        }
        None if drained => Err(SolveError::Infeasible),
        None => Err(SolveError::BudgetExhausted),
    }
}

/// Exact optimum by trying every fully fixed direction assignment; the
/// independent oracle the search is checked against.
pub fn brute_force_optimum(
    topo: &TopoMap,
    mapped: &MappedInstance,
    objective: ObjectiveKind,
) -> Result<Solution, SolveError> {
    let passages = topo.passages.len();
    if passages > BRUTE_FORCE_CAP {
        return Err(SolveError::TooLarge { passages, cap: BRUTE_FORCE_CAP });
    }
    let t0 = Instant::now();
    let mut ops = 0u64;
    let mut nodes = 0u64;
    let mut best: Option<(u32, TopoPathSet, PassageDirections)> = None;
    for mask in 0u32..(1u32 << passages) {
        let mut dirs = PassageDirections::all_free(passages);
        for i in 0..passages {
            let dir = if mask >> i & 1 == 1 { Direction::BToA } else { Direction::AToB };
            dirs.set(PassageId(i), dir);
        }
        nodes += 1;
        let Some(eval) = evaluate_node(topo, mapped, &dirs, objective, false, &mut ops) else {
            continue;
        };
        debug_assert!(eval.conflict.is_none(), "fully fixed assignments cannot conflict");
        if best.as_ref().is_none_or(|(b, _, _)| eval.bound < *b) {
            best = Some((eval.bound, eval.paths, eval.directions));
        }
    }
    match best {
        Some((objective, paths, directions)) => Ok(Solution {
            paths,
            directions,
            objective,
            bound: objective,
            optimal: true,
            nodes,
            wall: t0.elapsed(),
        }),
        None => Err(SolveError::Infeasible),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridMap, GridVertex, Instance, Robot};
    use crate::ip::{build_model, encode_warmstart, evaluate_assignment};
    use crate::topo::{extract_topo, map_endpoints, split_identical_endpoints};

    fn setup(map: &GridMap, robots: Vec<Robot>) -> (TopoMap, MappedInstance) {
        let topo = extract_topo(map);
        let inst = Instance { robots, seed: 0 };
        let mapped = map_endpoints(&topo, &inst);
        split_identical_endpoints(&topo, &mapped)
    }

    fn fig1() -> GridMap {
        GridMap::new(7, 13, vec![1, 4, 7], vec![1, 7, 13]).unwrap()
    }

    fn single_shelf() -> GridMap {
        GridMap::new(4, 4, vec![1, 4], vec![1, 4]).unwrap()
    }

    #[test]
    fn a_single_robot_is_settled_at_the_root() {
        let (topo, mapped) = setup(
            &fig1(),
            vec![Robot { id: 0, start: GridVertex::new(1, 1), goal: GridVertex::new(1, 7) }],
        );
        let sol = solve(&topo, &mapped, &SolveOptions::default()).unwrap();
        assert_eq!(sol.objective, 6);
        assert_eq!(sol.nodes, 1, "no branching needed");
        assert!(sol.optimal);
        assert_eq!(sol.bound, 6);
    }

    #[test]
    fn opposing_robots_send_one_the_long_way_round() {
        let (topo, mapped) = setup(
            &single_shelf(),
            vec![
                Robot { id: 0, start: GridVertex::new(1, 1), goal: GridVertex::new(1, 4) },
                Robot { id: 1, start: GridVertex::new(1, 4), goal: GridVertex::new(1, 1) },
            ],
        );
        for kind in [ObjectiveKind::Total, ObjectiveKind::Max] {
            let brute = brute_force_optimum(&topo, &mapped, kind).unwrap();
            let sol = solve(&topo, &mapped, &SolveOptions { objective: kind, ..Default::default() }).unwrap();
            assert_eq!(sol.objective, brute.objective);
            assert!(sol.optimal);
        }
        let total = brute_force_optimum(&topo, &mapped, ObjectiveKind::Total).unwrap();
        assert_eq!(total.objective, 12, "short way plus the three-sided detour");
        let max = brute_force_optimum(&topo, &mapped, ObjectiveKind::Max).unwrap();
        assert_eq!(max.objective, 9);
    }

    #[test]
    fn three_robots_match_the_full_enumeration_and_the_constraint_evaluator() {
        let robots = vec![
            Robot { id: 0, start: GridVertex::new(1, 1), goal: GridVertex::new(1, 13) },
            Robot { id: 1, start: GridVertex::new(1, 13), goal: GridVertex::new(1, 1) },
            Robot { id: 2, start: GridVertex::new(4, 1), goal: GridVertex::new(4, 13) },
        ];
        let (topo, mapped) = setup(&fig1(), robots);
        for kind in [ObjectiveKind::Total, ObjectiveKind::Max] {
            let brute = brute_force_optimum(&topo, &mapped, kind).unwrap();
            let sol = solve(&topo, &mapped, &SolveOptions { objective: kind, ..Default::default() }).unwrap();
            assert_eq!(sol.objective, brute.objective, "{kind:?}");
            assert!(sol.optimal);

            let model = build_model(&topo, &mapped, kind, false);
            let asg = encode_warmstart(&model, &sol.paths).unwrap();
            assert!(evaluate_assignment(&model, &asg).is_empty(), "{kind:?} solution must satisfy the model");
        }
    }

    #[test]
    fn no_passage_is_ever_used_in_both_senses() {
        let robots = vec![
            Robot { id: 0, start: GridVertex::new(1, 1), goal: GridVertex::new(7, 13) },
            Robot { id: 1, start: GridVertex::new(7, 13), goal: GridVertex::new(1, 1) },
            Robot { id: 2, start: GridVertex::new(4, 13), goal: GridVertex::new(4, 1) },
        ];
        let (topo, mapped) = setup(&fig1(), robots);
        let sol = solve(&topo, &mapped, &SolveOptions::default()).unwrap();
        let mut seen: Vec<Option<Direction>> = vec![None; topo.passages.len()];
        for path in &sol.paths.paths {
            let ctx = mapped.robot(path.robot);
            for w in path.vertices.windows(2) {
                let (p, d) = edge_direction(&topo, Some(ctx), w[0], w[1]).unwrap();
                assert_ne!(seen[p.0], Some(d.flip()), "passage {p} used both ways");
                seen[p.0] = Some(d);
                assert!(sol.directions.allows(p, d), "route disagrees with reported directions");
            }
        }
    }

    #[test]
    fn warm_start_keeps_the_objective_and_does_not_add_nodes() {
        let robots = vec![
            Robot { id: 0, start: GridVertex::new(1, 1), goal: GridVertex::new(1, 13) },
            Robot { id: 1, start: GridVertex::new(1, 13), goal: GridVertex::new(1, 1) },
            Robot { id: 2, start: GridVertex::new(7, 1), goal: GridVertex::new(1, 7) },
        ];
        let (topo, mapped) = setup(&fig1(), robots);
        let cold = solve(&topo, &mapped, &SolveOptions::default()).unwrap();
        let incumbent = brute_force_optimum(&topo, &mapped, ObjectiveKind::Total).unwrap();
        let warm = solve(
            &topo,
            &mapped,
            &SolveOptions { incumbent: Some(incumbent.paths.clone()), ..Default::default() },
        )
        .unwrap();
        assert_eq!(warm.objective, cold.objective);
        assert!(warm.nodes <= cold.nodes, "warm {} vs cold {}", warm.nodes, cold.nodes);
        assert!(warm.optimal);
    }

    #[test]
    fn an_inconsistent_incumbent_is_rejected() {
        let (topo, mapped) = setup(
            &fig1(),
            vec![
                Robot { id: 0, start: GridVertex::new(1, 1), goal: GridVertex::new(1, 7) },
                Robot { id: 1, start: GridVertex::new(1, 7), goal: GridVertex::new(1, 1) },
            ],
        );
        let head_on = TopoPathSet {
            paths: vec![
                TopoPath { robot: 0, vertices: vec![mapped.robot(0).start, TopoVertexId(9), mapped.robot(0).goal], cost: 6 },
                TopoPath { robot: 1, vertices: vec![mapped.robot(1).start, TopoVertexId(9), mapped.robot(1).goal], cost: 6 },
            ],
        };
        let got = solve(
            &topo,
            &mapped,
            &SolveOptions { incumbent: Some(head_on), ..Default::default() },
        );
        assert!(matches!(got, Err(SolveError::InvalidIncumbent(_))));
    }

    #[test]
    fn a_stranded_start_is_infeasible_everywhere() {
        let (mut topo, mapped) = setup(
            &fig1(),
            vec![Robot { id: 0, start: GridVertex::new(4, 7), goal: GridVertex::new(1, 1) }],
        );
        let start = topo.crossing_at(GridVertex::new(4, 7)).unwrap();
        topo.strand_crossing(start);
        assert!(matches!(solve(&topo, &mapped, &SolveOptions::default()), Err(SolveError::Infeasible)));
        assert!(matches!(
            brute_force_optimum(&topo, &mapped, ObjectiveKind::Total),
            Err(SolveError::Infeasible)
        ));
    }

    #[test]
    fn enumeration_refuses_oversized_maps() {
        let map = GridMap::new(7, 25, vec![1, 4, 7], vec![1, 7, 13, 19, 25]).unwrap();
        let (topo, mapped) = setup(&map, vec![Robot { id: 0, start: GridVertex::new(1, 1), goal: GridVertex::new(7, 25) }]);
        assert!(topo.passages.len() > BRUTE_FORCE_CAP);
        assert!(matches!(
            brute_force_optimum(&topo, &mapped, ObjectiveKind::Total),
            Err(SolveError::TooLarge { .. })
        ));
    }

    #[test]
    fn zero_budget_returns_the_incumbent_unproved_or_nothing() {
        let robots = vec![
            Robot { id: 0, start: GridVertex::new(1, 1), goal: GridVertex::new(1, 13) },
            Robot { id: 1, start: GridVertex::new(1, 13), goal: GridVertex::new(1, 1) },
        ];
        let (topo, mapped) = setup(&fig1(), robots);
        let incumbent = brute_force_optimum(&topo, &mapped, ObjectiveKind::Total).unwrap();

        let with = solve(
            &topo,
            &mapped,
            &SolveOptions {
                incumbent: Some(incumbent.paths.clone()),
                budget: Some(Duration::ZERO),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(with.objective, incumbent.objective);
        assert!(!with.optimal || with.bound == with.objective);

        let without = solve(
            &topo,
            &mapped,
            &SolveOptions { budget: Some(Duration::ZERO), ..Default::default() },
        );
        assert!(matches!(without, Err(SolveError::BudgetExhausted)));
    }

    #[test]
    fn directed_search_reports_unreachable_targets() {
        let (topo, _) = setup(&single_shelf(), vec![]);
        let tl = topo.crossing_at(GridVertex::new(1, 1)).unwrap();
        let tr = topo.crossing_at(GridVertex::new(1, 4)).unwrap();
        let br = topo.crossing_at(GridVertex::new(4, 4)).unwrap();

        let mut dirs = PassageDirections::all_free(topo.passages.len());
        let free = directed_shortest_path(&topo, &dirs, None, tl, tr).unwrap();
        assert_eq!(free.cost, 3);

        // Point the top corridor out of the corner and the right corridor
        // away from it; nothing can enter the top-right crossing.
        for p in &topo.passages {
            if p.a == tl && p.b == tr {
                dirs.set(p.id, Direction::BToA);
            }
            if p.a == tr && p.b == br {
                dirs.set(p.id, Direction::AToB);
            }
        }
        assert_eq!(
            directed_shortest_path(&topo, &dirs, None, tl, tr),
            Err(Unreachable { from: tl.0, to: tr.0 })
        );
        let around = directed_shortest_path(&topo, &dirs, None, tl, br).unwrap();
        assert_eq!(around.cost, 6, "down the left side and across the bottom");
    }
}
