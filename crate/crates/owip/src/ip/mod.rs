//! Exact integer-program formulation of the one-way planning problem.
//!
//! Per robot, a binary variable marks each directed edge instance of the
//! topological map. Flow constraints pin start and goal, an order variable
//! per intermediate vertex rules out subtours, and a binary per passage
//! forbids opposing traffic: with `z_p = 0` only travel in the `a -> b`
//! sense is open, with `z_p = 1` only the reverse. The model is exchanged
//! as LP text plus `name value` assignment files, so any external solver
//! can be plugged in; the in-crate solver lives in [`crate::bnb`].

mod codec;
mod lp;

pub use codec::{decode_solution, encode_warmstart, evaluate_assignment, DecodeError, DecodedSolution, EncodeError, Violation};
pub use lp::{export_assignment, export_lp, parse_assignment, AssignmentParseError};

use std::collections::HashMap;

use crate::topo::{
    edge_direction, Direction, MappedInstance, ObjectiveKind, PassageId, PassageVertices,
    TopoMap, TopoVertexId,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VarKind {
    /// Robot `robot` travels the directed edge `from -> to`.
    EdgeUse { robot: usize, from: TopoVertexId, to: TopoVertexId },
    /// Visit order of an intermediate vertex on the robot's route.
    Order { robot: usize, vertex: TopoVertexId },
    /// Travel distance of one robot, used by the max-distance objective.
    RobotMax { robot: usize },
    /// Upper envelope over all robot distances.
    Makespan,
    /// Direction selector of one passage: 0 opens `a -> b`, 1 opens `b -> a`.
    PassageDir { passage: PassageId },
    /// Robot passes through (leaves) a crossing; congestion bookkeeping.
    Passed { robot: usize, crossing: TopoVertexId },
    /// Upper envelope over per-crossing robot counts.
    CongestionMax,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lo: i64,
    pub hi: i64,
}

impl Variable {
    pub fn is_binary(&self) -> bool {
        self.lo == 0 && self.hi == 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinTerm {
    pub coef: i64,
    pub var: VarId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

impl Cmp {
    pub fn as_str(self) -> &'static str {
        match self {
            Cmp::Le => "<=",
            Cmp::Ge => ">=",
            Cmp::Eq => "=",
        }
    }

    pub fn holds(self, lhs: i64, rhs: i64) -> bool {
        match self {
            Cmp::Le => lhs <= rhs,
            Cmp::Ge => lhs >= rhs,
            Cmp::Eq => lhs == rhs,
        }
    }
}

/// Constraint family, one tag per block of the formulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintTag {
    /// Unit outflow at the start vertex.
    Eq1,
    /// Unit inflow at the goal; no inflow at start, no outflow at goal.
    Eq2,
    /// Flow conservation with capacity one at intermediate vertices.
    Eq3,
    /// Order-variable subtour elimination.
    Eq4,
    /// Directional caps tying edge use to the passage selector.
    OneWay,
    /// Per-robot distance envelope for the max-distance objective.
    XmaxLink,
    /// Crossing-passage counters and their envelope.
    Congestion,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub name: String,
    pub tag: ConstraintTag,
    pub terms: Vec<LinTerm>,
    pub cmp: Cmp,
    pub rhs: i64,
}

/// Values indexed by [`VarId`]; missing entries read as zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub values: Vec<i64>,
}

impl Assignment {
    pub fn zeros(model: &IpModel) -> Self {
        Assignment { values: vec![0; model.vars.len()] }
    }

    pub fn get(&self, v: VarId) -> i64 {
        self.values[v.0]
    }

    pub fn set(&mut self, v: VarId, value: i64) {
        self.values[v.0] = value;
    }
}

#[derive(Debug, Clone)]
pub struct IpModel {
    pub topo: TopoMap,
    pub mapped: MappedInstance,
    pub objective_kind: ObjectiveKind,
    pub congestion: bool,
    pub vars: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Minimised linear objective.
    pub objective: Vec<LinTerm>,
    name_index: HashMap<String, VarId>,
    edge_index: HashMap<(usize, TopoVertexId, TopoVertexId), VarId>,
    order_index: HashMap<(usize, TopoVertexId), VarId>,
    robot_max_index: HashMap<usize, VarId>,
    passage_dir_index: HashMap<PassageId, VarId>,
    passed_index: HashMap<(usize, TopoVertexId), VarId>,
    makespan: Option<VarId>,
    congestion_max: Option<VarId>,
}

impl IpModel {
    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.name_index.get(name).copied()
    }

    pub fn edge_var(&self, robot: usize, from: TopoVertexId, to: TopoVertexId) -> Option<VarId> {
        self.edge_index.get(&(robot, from, to)).copied()
    }

    pub fn order_var(&self, robot: usize, vertex: TopoVertexId) -> Option<VarId> {
        self.order_index.get(&(robot, vertex)).copied()
    }

    pub fn robot_max_var(&self, robot: usize) -> Option<VarId> {
        self.robot_max_index.get(&robot).copied()
    }

    pub fn passage_dir_var(&self, p: PassageId) -> Option<VarId> {
        self.passage_dir_index.get(&p).copied()
    }

    pub fn passed_var(&self, robot: usize, crossing: TopoVertexId) -> Option<VarId> {
        self.passed_index.get(&(robot, crossing)).copied()
    }

    pub fn makespan_var(&self) -> Option<VarId> {
        self.makespan
    }

    pub fn congestion_max_var(&self) -> Option<VarId> {
        self.congestion_max
    }

    /// Directed edge instances of one robot, in variable order.
    pub fn robot_edges(&self, robot: usize) -> Vec<(TopoVertexId, TopoVertexId)> {
        robot_edge_instances(&self.topo, &self.mapped, robot)
    }

    pub fn objective_value(&self, asg: &Assignment) -> i64 {
        self.objective.iter().map(|t| t.coef * asg.get(t.var)).sum()
    }
}

/// Directed edge instances available to one robot: both senses of every
/// structural edge, plus both senses of the direct edge between split copies
/// when the robot owns that split.
fn robot_edge_instances(topo: &TopoMap, mapped: &MappedInstance, robot: usize) -> Vec<(TopoVertexId, TopoVertexId)> {
    let ctx = mapped.robot(robot);
    let mut out = Vec::new();
    for p in &topo.passages {
        for c in p.copies() {
            out.push((p.a, c));
            out.push((c, p.a));
            out.push((p.b, c));
            out.push((c, p.b));
        }
        if ctx.split.map(|s| s.passage) == Some(p.id) {
            if let PassageVertices::Split { v_in, v_out } = p.vertices {
                out.push((v_in, v_out));
                out.push((v_out, v_in));
            }
        }
    }
    out
}

/// Builds the full model for every travelling robot. Stationary robots
/// contribute no variables; their single-cell routes are reattached when a
/// solution is decoded.
pub fn build_model(
    topo: &TopoMap,
    mapped: &MappedInstance,
    objective_kind: ObjectiveKind,
    congestion: bool,
) -> IpModel {
    let mut model = IpModel {
        topo: topo.clone(),
        mapped: mapped.clone(),
        objective_kind,
        congestion,
        vars: Vec::new(),
        constraints: Vec::new(),
        objective: Vec::new(),
        name_index: HashMap::new(),
        edge_index: HashMap::new(),
        order_index: HashMap::new(),
        robot_max_index: HashMap::new(),
        passage_dir_index: HashMap::new(),
        passed_index: HashMap::new(),
        makespan: None,
        congestion_max: None,
    };

    let routed: Vec<usize> = mapped.robots.iter().filter(|r| !r.stationary).map(|r| r.robot).collect();
    if routed.is_empty() {
        return model;
    }

    let v_count = topo.vertex_count() as i64;
    let travel_bound: i64 = topo.structural_edges().iter().map(|&(_, _, w)| w as i64).sum();

    let add_var = |model: &mut IpModel, name: String, kind: VarKind, lo: i64, hi: i64| -> VarId {
        let id = VarId(model.vars.len());
        model.name_index.insert(name.clone(), id);
        model.vars.push(Variable { name, kind, lo, hi });
        id
    };

    // Variables: edge use per robot, then orders, then objective and
    // direction bookkeeping. Order is fixed so exports are reproducible.
    for &r in &routed {
        for (from, to) in robot_edge_instances(topo, mapped, r) {
            let name = format!("x_r{}_{}_{}", r, topo.vertex_name(from), topo.vertex_name(to));
            let id = add_var(&mut model, name, VarKind::EdgeUse { robot: r, from, to }, 0, 1);
            model.edge_index.insert((r, from, to), id);
        }
    }
    for &r in &routed {
        let ctx = mapped.robot(r);
        for v in 0..topo.vertex_count() {
            let v = TopoVertexId(v);
            if v == ctx.start || v == ctx.goal {
                continue;
            }
            let name = format!("u_r{}_{}", r, topo.vertex_name(v));
            let id = add_var(&mut model, name, VarKind::Order { robot: r, vertex: v }, 3, v_count);
            model.order_index.insert((r, v), id);
        }
    }
    if objective_kind == ObjectiveKind::Max {
        for &r in &routed {
            let name = format!("xmax_r{r}");
            let id = add_var(&mut model, name, VarKind::RobotMax { robot: r }, 0, travel_bound);
            model.robot_max_index.insert(r, id);
        }
        let id = add_var(&mut model, "Xmax".to_string(), VarKind::Makespan, 0, travel_bound);
        model.makespan = Some(id);
    }
    for p in &topo.passages {
        let name = format!("z_p{}", p.id.0);
        let id = add_var(&mut model, name, VarKind::PassageDir { passage: p.id }, 0, 1);
        model.passage_dir_index.insert(p.id, id);
    }
    if congestion {
        for &r in &routed {
            for &c in &topo.crossings {
                let name = format!("P_r{}_{}", r, topo.vertex_name(c));
                let id = add_var(&mut model, name, VarKind::Passed { robot: r, crossing: c }, 0, 1);
                model.passed_index.insert((r, c), id);
            }
        }
        let id = add_var(&mut model, "Cmax".to_string(), VarKind::CongestionMax, 0, routed.len() as i64);
        model.congestion_max = Some(id);
    }

    // Objective.
    match objective_kind {
        ObjectiveKind::Total => {
            for &r in &routed {
                for (from, to) in robot_edge_instances(topo, mapped, r) {
                    let w = topo.vertex(from).cell.manhattan(topo.vertex(to).cell) as i64;
                    if w != 0 {
                        let var = model.edge_index[&(r, from, to)];
                        model.objective.push(LinTerm { coef: w, var });
                    }
                }
            }
        }
        ObjectiveKind::Max => {
            model.objective.push(LinTerm { coef: 1, var: model.makespan.unwrap() });
        }
    }
    if let Some(cmax) = model.congestion_max {
        model.objective.push(LinTerm { coef: 1, var: cmax });
    }

    // Flow constraints per robot.
    for &r in &routed {
        let ctx = *mapped.robot(r);
        let edges = robot_edge_instances(topo, mapped, r);
        let out_of = |v: TopoVertexId| -> Vec<VarId> {
            edges.iter().filter(|&&(f, _)| f == v).map(|&(f, t)| model.edge_index[&(r, f, t)]).collect()
        };
        let into = |v: TopoVertexId| -> Vec<VarId> {
            edges.iter().filter(|&&(_, t)| t == v).map(|&(f, t)| model.edge_index[&(r, f, t)]).collect()
        };

        let unit = |vars: Vec<VarId>| -> Vec<LinTerm> {
            vars.into_iter().map(|var| LinTerm { coef: 1, var }).collect()
        };
        model.constraints.push(Constraint {
            name: format!("Eq1_r{r}"),
            tag: ConstraintTag::Eq1,
            terms: unit(out_of(ctx.start)),
            cmp: Cmp::Eq,
            rhs: 1,
        });
        model.constraints.push(Constraint {
            name: format!("Eq2_in_r{r}"),
            tag: ConstraintTag::Eq2,
            terms: unit(into(ctx.goal)),
            cmp: Cmp::Eq,
            rhs: 1,
        });
        model.constraints.push(Constraint {
            name: format!("Eq2_noout_r{r}"),
            tag: ConstraintTag::Eq2,
            terms: unit(out_of(ctx.goal)),
            cmp: Cmp::Eq,
            rhs: 0,
        });
        model.constraints.push(Constraint {
            name: format!("Eq2_noin_r{r}"),
            tag: ConstraintTag::Eq2,
            terms: unit(into(ctx.start)),
            cmp: Cmp::Eq,
            rhs: 0,
        });
        for v in 0..topo.vertex_count() {
            let v = TopoVertexId(v);
            if v == ctx.start || v == ctx.goal {
                continue;
            }
            let mut terms: Vec<LinTerm> = out_of(v).into_iter().map(|var| LinTerm { coef: 1, var }).collect();
            terms.extend(into(v).into_iter().map(|var| LinTerm { coef: -1, var }));
            model.constraints.push(Constraint {
                name: format!("Eq3_bal_r{}_{}", r, topo.vertex_name(v)),
                tag: ConstraintTag::Eq3,
                terms,
                cmp: Cmp::Eq,
                rhs: 0,
            });
            model.constraints.push(Constraint {
                name: format!("Eq3_cap_r{}_{}", r, topo.vertex_name(v)),
                tag: ConstraintTag::Eq3,
                terms: unit(into(v)),
                cmp: Cmp::Le,
                rhs: 1,
            });
        }
        // Subtour elimination over intermediate vertices.
        for &(from, to) in &edges {
            let (Some(&uf), Some(&ut)) = (model.order_index.get(&(r, from)), model.order_index.get(&(r, to))) else {
                continue;
            };
            let x = model.edge_index[&(r, from, to)];
            model.constraints.push(Constraint {
                name: format!("Eq4_r{}_{}_{}", r, topo.vertex_name(from), topo.vertex_name(to)),
                tag: ConstraintTag::Eq4,
                terms: vec![
                    LinTerm { coef: 1, var: uf },
                    LinTerm { coef: -1, var: ut },
                    LinTerm { coef: v_count, var: x },
                ],
                cmp: Cmp::Le,
                rhs: v_count - 1,
            });
        }
    }

    // One-way caps: every edge instance is tied to its passage selector
    // according to the travel sense it implies for that robot.
    for &r in &routed {
        let ctx = mapped.robot(r);
        for (from, to) in robot_edge_instances(topo, mapped, r) {
            let Some((p, dir)) = edge_direction(topo, Some(ctx), from, to) else {
                continue;
            };
            let x = model.edge_index[&(r, from, to)];
            let z = model.passage_dir_index[&p];
            let (terms, rhs) = match dir {
                Direction::AToB => (vec![LinTerm { coef: 1, var: x }, LinTerm { coef: 1, var: z }], 1),
                Direction::BToA => (vec![LinTerm { coef: 1, var: x }, LinTerm { coef: -1, var: z }], 0),
            };
            model.constraints.push(Constraint {
                name: format!("OneWay_r{}_{}_{}", r, topo.vertex_name(from), topo.vertex_name(to)),
                tag: ConstraintTag::OneWay,
                terms,
                cmp: Cmp::Le,
                rhs,
            });
        }
    }

    if objective_kind == ObjectiveKind::Max {
        for &r in &routed {
            let mut terms: Vec<LinTerm> = Vec::new();
            for (from, to) in robot_edge_instances(topo, mapped, r) {
                let w = topo.vertex(from).cell.manhattan(topo.vertex(to).cell) as i64;
                if w != 0 {
                    terms.push(LinTerm { coef: w, var: model.edge_index[&(r, from, to)] });
                }
            }
            terms.push(LinTerm { coef: -1, var: model.robot_max_index[&r] });
            model.constraints.push(Constraint {
                name: format!("XmaxLink_r{r}"),
                tag: ConstraintTag::XmaxLink,
                terms,
                cmp: Cmp::Le,
                rhs: 0,
            });
            model.constraints.push(Constraint {
                name: format!("XmaxLink_env_r{r}"),
                tag: ConstraintTag::XmaxLink,
                terms: vec![
                    LinTerm { coef: 1, var: model.robot_max_index[&r] },
                    LinTerm { coef: -1, var: model.makespan.unwrap() },
                ],
                cmp: Cmp::Le,
                rhs: 0,
            });
        }
    }

    if congestion {
        for &r in &routed {
            let edges = robot_edge_instances(topo, mapped, r);
            for &c in &topo.crossings {
                let pv = model.passed_index[&(r, c)];
                for &(from, to) in edges.iter().filter(|&&(f, _)| f == c) {
                    model.constraints.push(Constraint {
                        name: format!("Congestion_r{}_{}_{}", r, topo.vertex_name(from), topo.vertex_name(to)),
                        tag: ConstraintTag::Congestion,
                        terms: vec![
                            LinTerm { coef: 1, var: model.edge_index[&(r, from, to)] },
                            LinTerm { coef: -1, var: pv },
                        ],
                        cmp: Cmp::Le,
                        rhs: 0,
                    });
                }
            }
        }
        for &c in &topo.crossings {
            let mut terms: Vec<LinTerm> = routed
                .iter()
                .map(|&r| LinTerm { coef: 1, var: model.passed_index[&(r, c)] })
                .collect();
            terms.push(LinTerm { coef: -1, var: model.congestion_max.unwrap() });
            model.constraints.push(Constraint {
                name: format!("Congestion_cap_{}", topo.vertex_name(c)),
                tag: ConstraintTag::Congestion,
                terms,
                cmp: Cmp::Le,
                rhs: 0,
            });
        }
    }

    model
}
