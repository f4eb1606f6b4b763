//! Bridges between route plans and model assignments: encoding a plan as a
//! warm start, checking an assignment against every constraint, and decoding
//! a feasible assignment back into per-robot routes.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use super::{Assignment, IpModel, VarKind};
use crate::topo::{collect_directions, Direction, PassageDirections, TopoPath, TopoPathSet, TopoVertexId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Bounds { var: String, value: i64, lo: i64, hi: i64 },
    Constraint { name: String, lhs: i64, cmp: &'static str, rhs: i64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Bounds { var, value, lo, hi } => {
                write!(f, "{var} = {value} outside [{lo}, {hi}]")
            }
            Violation::Constraint { name, lhs, cmp, rhs } => {
                write!(f, "{name}: {lhs} {cmp} {rhs} fails")
            }
        }
    }
}

/// Checks bounds and every constraint; returns one entry per breach.
pub fn evaluate_assignment(model: &IpModel, asg: &Assignment) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, v) in model.vars.iter().enumerate() {
        let value = asg.values[i];
        if value < v.lo || value > v.hi {
            out.push(Violation::Bounds { var: v.name.clone(), value, lo: v.lo, hi: v.hi });
        }
    }
    for c in &model.constraints {
        let lhs: i64 = c.terms.iter().map(|t| t.coef * asg.get(t.var)).sum();
        if !c.cmp.holds(lhs, c.rhs) {
            out.push(Violation::Constraint { name: c.name.clone(), lhs, cmp: c.cmp.as_str(), rhs: c.rhs });
        }
    }
    out
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EncodeError {
    #[error("no route supplied for robot {robot}")]
    MissingRobot { robot: usize },
    #[error("route supplied for unknown robot {robot}")]
    UnknownRobot { robot: usize },
    #[error("robot {robot}: route endpoints do not match the instance")]
    EndpointMismatch { robot: usize },
    #[error("robot {robot}: route revisits a vertex")]
    NotSimple { robot: usize },
    #[error("robot {robot}: step {from} -> {to} is not an edge available to it")]
    UnknownEdge { robot: usize, from: usize, to: usize },
    #[error("passage {passage} is travelled in both senses")]
    OpposingUse { passage: usize },
}

/// Encodes a set of per-robot routes as a full assignment: edge uses, visit
/// orders, passage selectors, and the objective envelopes. The result
/// satisfies every constraint whenever the routes are simple and share no
/// passage in opposite senses.
pub fn encode_warmstart(model: &IpModel, paths: &TopoPathSet) -> Result<Assignment, EncodeError> {
    let mut asg = Assignment::zeros(model);
    // Unvisited intermediates still need an in-range order value.
    for (i, v) in model.vars.iter().enumerate() {
        if matches!(v.kind, VarKind::Order { .. }) {
            asg.values[i] = v.lo;
        }
    }

    let mut by_robot: HashMap<usize, &TopoPath> = HashMap::new();
    for p in &paths.paths {
        if model.mapped.robots.iter().all(|m| m.robot != p.robot) {
            return Err(EncodeError::UnknownRobot { robot: p.robot });
        }
        by_robot.insert(p.robot, p);
    }

    let mut max_cost: i64 = 0;
    for ctx in &model.mapped.robots {
        if ctx.stationary {
            continue;
        }
        let r = ctx.robot;
        let path = by_robot.get(&r).copied().ok_or(EncodeError::MissingRobot { robot: r })?;
        let vs = &path.vertices;
        if vs.first() != Some(&ctx.start) || vs.last() != Some(&ctx.goal) {
            return Err(EncodeError::EndpointMismatch { robot: r });
        }
        let mut seen: HashSet<TopoVertexId> = HashSet::new();
        if !vs.iter().all(|v| seen.insert(*v)) {
            return Err(EncodeError::NotSimple { robot: r });
        }
        for w in vs.windows(2) {
            let var = model
                .edge_var(r, w[0], w[1])
                .ok_or(EncodeError::UnknownEdge { robot: r, from: w[0].0, to: w[1].0 })?;
            asg.set(var, 1);
        }
        for (i, &v) in vs.iter().enumerate().skip(1).take(vs.len().saturating_sub(2)) {
            let var = model.order_var(r, v).expect("intermediate vertex has an order variable");
            asg.set(var, 2 + i as i64);
        }
        if let Some(var) = model.robot_max_var(r) {
            asg.set(var, path.cost as i64);
        }
        max_cost = max_cost.max(path.cost as i64);
        if model.congestion {
            for w in vs.windows(2) {
                if let Some(var) = model.passed_var(r, w[0]) {
                    asg.set(var, 1);
                }
            }
        }
    }
    if let Some(var) = model.makespan_var() {
        asg.set(var, max_cost);
    }
    if let Some(var) = model.congestion_max_var() {
        let mut worst = 0;
        for &c in &model.topo.crossings {
            let here: i64 = model
                .mapped
                .robots
                .iter()
                .filter_map(|m| model.passed_var(m.robot, c))
                .map(|v| asg.get(v))
                .sum();
            worst = worst.max(here);
        }
        asg.set(var, worst);
    }

    let dirs = collect_directions(&model.topo, &model.mapped, paths)
        .map_err(|p| EncodeError::OpposingUse { passage: p.0 })?;
    for p in &model.topo.passages {
        if dirs.get(p.id) == Some(Direction::BToA) {
            asg.set(model.passage_dir_var(p.id).expect("selector exists"), 1);
        }
    }
    Ok(asg)
}

#[derive(Debug, Clone)]
pub struct DecodedSolution {
    pub paths: TopoPathSet,
    pub directions: PassageDirections,
}

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("assignment violates {} constraint(s); first: {}", .violations.len(), .violations[0])]
    Infeasible { violations: Vec<Violation> },
    #[error("robot {robot}: flow through vertex {vertex} is not a single chain")]
    BrokenFlow { robot: usize, vertex: usize },
}

/// Reads the routes out of a feasible assignment. The assignment is checked
/// first; anything violating a constraint is rejected rather than guessed at.
pub fn decode_solution(model: &IpModel, asg: &Assignment) -> Result<DecodedSolution, DecodeError> {
    let violations = evaluate_assignment(model, asg);
    if !violations.is_empty() {
        return Err(DecodeError::Infeasible { violations });
    }

    let mut paths = Vec::new();
    for ctx in &model.mapped.robots {
        if ctx.stationary {
            paths.push(TopoPath { robot: ctx.robot, vertices: vec![ctx.start], cost: 0 });
            continue;
        }
        let r = ctx.robot;
        let mut next: HashMap<TopoVertexId, TopoVertexId> = HashMap::new();
        for (from, to) in model.robot_edges(r) {
            if asg.get(model.edge_var(r, from, to).unwrap()) == 1
                && next.insert(from, to).is_some()
            {
                return Err(DecodeError::BrokenFlow { robot: r, vertex: from.0 });
            }
        }
        let mut vertices = vec![ctx.start];
        let mut cost = 0u32;
        let mut seen: HashSet<TopoVertexId> = HashSet::new();
        seen.insert(ctx.start);
        let mut at = ctx.start;
        while at != ctx.goal {
            let Some(&to) = next.get(&at) else {
                return Err(DecodeError::BrokenFlow { robot: r, vertex: at.0 });
            };
            if !seen.insert(to) {
                return Err(DecodeError::BrokenFlow { robot: r, vertex: to.0 });
            }
            cost += model.topo.vertex(at).cell.manhattan(model.topo.vertex(to).cell) as u32;
            vertices.push(to);
            at = to;
        }
        paths.push(TopoPath { robot: r, vertices, cost });
    }

    let mut directions = PassageDirections::all_free(model.topo.passages.len());
    for p in &model.topo.passages {
        if let Some(z) = model.passage_dir_var(p.id) {
            let dir = if asg.get(z) == 1 { Direction::BToA } else { Direction::AToB };
            directions.set(p.id, dir);
        }
    }
    Ok(DecodedSolution { paths: TopoPathSet { paths }, directions })
}
