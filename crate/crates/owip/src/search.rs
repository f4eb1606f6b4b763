//! Deterministic shortest-path search on the topological map.
//!
//! Searches run over a [`DirectedView`]: the structural edges filtered by a
//! per-passage direction assignment, plus the zero-weight direct edge between
//! split copies for the robot that owns the split. With every passage free
//! the view is equivalent to the undirected map.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::topo::{
    Direction, MappedRobot, PassageDirections, TopoMap, TopoVertexId, VertexKind,
};

/// Edge filter for one search. `robot` only matters for split corridors: the
/// owning robot may hop from its start copy straight to its goal copy when
/// the corridor direction matches its in-corridor walk.
pub struct DirectedView<'a> {
    pub topo: &'a TopoMap,
    pub dirs: &'a PassageDirections,
    pub robot: Option<&'a MappedRobot>,
}

impl<'a> DirectedView<'a> {
    pub fn free(topo: &'a TopoMap, dirs: &'a PassageDirections) -> Self {
        DirectedView { topo, dirs, robot: None }
    }

    /// Calls `f(target, weight)` for every directed edge leaving `v`.
    pub fn for_each_neighbor(&self, v: TopoVertexId, mut f: impl FnMut(TopoVertexId, u32)) {
        let vertex = self.topo.vertex(v);
        match vertex.kind {
            VertexKind::Crossing => {
                for &pid in self.topo.incident_passages(v) {
                    let p = self.topo.passage(pid);
                    let (dir, weight) = if v == p.a {
                        (Direction::AToB, p.weight_a)
                    } else {
                        (Direction::BToA, p.weight_b)
                    };
                    if self.dirs.allows(pid, dir) {
                        for copy in p.copies() {
                            f(copy, weight);
                        }
                    }
                }
            }
            VertexKind::Passage(pid) | VertexKind::SplitIn(pid) | VertexKind::SplitOut(pid) => {
                let p = self.topo.passage(pid);
                if self.dirs.allows(pid, Direction::BToA) {
                    f(p.a, p.weight_a);
                }
                if self.dirs.allows(pid, Direction::AToB) {
                    f(p.b, p.weight_b);
                }
                if let (VertexKind::SplitIn(_), Some(robot)) = (vertex.kind, self.robot) {
                    if let Some(split) = robot.split.filter(|s| s.passage == pid) {
                        if self.dirs.allows(pid, split.direction) {
                            if let crate::topo::PassageVertices::Split { v_out, .. } = p.vertices {
                                f(v_out, 0);
                            }
                        }
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchResult {
    pub cost: u32,
    pub path: Vec<TopoVertexId>,
}

/// A* with the Manhattan heuristic on vertex cells; pass `use_heuristic =
/// false` for plain Dijkstra. Ties in the queue resolve by vertex id and
/// equal-cost predecessors by the smaller predecessor id (optionally biased
/// by a congestion usage table first), so results are fully deterministic.
/// Every queue pop and edge relaxation bumps `ops`.
pub fn shortest_path(
    view: &DirectedView,
    start: TopoVertexId,
    goal: TopoVertexId,
    use_heuristic: bool,
    usage_bias: Option<&[u32]>,
    ops: &mut u64,
) -> Option<SearchResult> {
    let n = view.topo.vertex_count();
    let goal_cell = view.topo.vertex(goal).cell;
    let h = |v: TopoVertexId| -> u32 {
        if use_heuristic {
            view.topo.vertex(v).cell.manhattan(goal_cell) as u32
        } else {
            0
        }
    };

    let mut dist: Vec<Option<u32>> = vec![None; n];
    let mut pred: Vec<Option<TopoVertexId>> = vec![None; n];
    let mut settled = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(u32, usize)>> = BinaryHeap::new();

    dist[start.0] = Some(0);
    heap.push(Reverse((h(start), start.0)));

    let better_pred = |cand: TopoVertexId, cur: Option<TopoVertexId>| -> bool {
        let Some(cur) = cur else { return true };
        if let Some(usage) = usage_bias {
            let key = |v: TopoVertexId| (usage[v.0], v.0);
            key(cand) < key(cur)
        } else {
            cand.0 < cur.0
        }
    };

    while let Some(Reverse((_, v))) = heap.pop() {
        if settled[v] {
            continue;
        }
        settled[v] = true;
        *ops += 1;
        if v == goal.0 {
            break;
        }
        let dv = dist[v].expect("queued vertices have a distance");
        view.for_each_neighbor(TopoVertexId(v), |to, w| {
            *ops += 1;
            if settled[to.0] {
                return;
            }
            let nd = dv + w;
            match dist[to.0] {
                Some(old) if nd > old => {}
                Some(old) if nd == old => {
                    if better_pred(TopoVertexId(v), pred[to.0]) {
                        pred[to.0] = Some(TopoVertexId(v));
                    }
                }
                _ => {
                    dist[to.0] = Some(nd);
                    pred[to.0] = Some(TopoVertexId(v));
                    heap.push(Reverse((nd + h(to), to.0)));
                }
            }
        });
    }

    if start == goal {
        return Some(SearchResult { cost: 0, path: vec![start] });
    }
    let cost = dist[goal.0]?;
    if !settled[goal.0] {
        return None;
    }
    let mut path = vec![goal];
    let mut cur = goal;
    while cur != start {
        cur = pred[cur.0].expect("settled vertices have predecessors");
        path.push(cur);
    }
    path.reverse();
    Some(SearchResult { cost, path })
}
