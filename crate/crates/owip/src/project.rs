//! Expands topological routes to full grid paths. Each topo edge becomes
//! the corridor cells it stands for; the robot's true start and goal cells
//! splice in at the ends, since a corridor's single vertex only approximates
//! where inside it a robot actually stands.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridMap, GridPath, GridVertex};
use crate::topo::{
    edge_direction, Direction, MappedInstance, ObjectiveKind, PassageDirections, PassageId,
    TopoMap, TopoPathSet,
};

/// Grid-level plan: one untimed cell walk per robot plus the direction each
/// corridor is locked to. Crossing cells are the mutual-exclusion resources
/// the execution controller guards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectedPlan {
    pub paths: Vec<GridPath>,
    pub directions: PassageDirections,
    pub crossings: BTreeSet<GridVertex>,
}

impl ProjectedPlan {
    /// Number of cell changes in one robot's walk; repeated cells are waits
    /// and do not count.
    pub fn path_length(&self, robot: usize) -> usize {
        self.paths.iter().find(|p| p.robot == robot).map_or(0, |p| p.len())
    }

    /// Plan cost over true grid lengths.
    pub fn grid_objective(&self, kind: ObjectiveKind) -> u64 {
        match kind {
            ObjectiveKind::Total => self.paths.iter().map(|p| p.len() as u64).sum(),
            ObjectiveKind::Max => self.paths.iter().map(|p| p.len() as u64).max().unwrap_or(0),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProjectError {
    #[error("no route for robot {robot}")]
    MissingRoute { robot: usize },
    #[error("robot {robot}: step {from} -> {to} is not an edge of the map")]
    NotAnEdge { robot: usize, from: usize, to: usize },
    #[error("robot {robot}: walk along corridor {passage} opposes its assigned direction")]
    DirectionMismatch { robot: usize, passage: usize },
}

/// Expands every robot's topo route into grid cells, verifying each corridor
/// walk against the plan's direction assignment. Stationary robots become
/// single-cell walks.
pub fn project_paths(
    topo: &TopoMap,
    mapped: &MappedInstance,
    routes: &TopoPathSet,
    directions: &PassageDirections,
) -> Result<ProjectedPlan, ProjectError> {
    let mut paths = Vec::with_capacity(mapped.robots.len());
    for ctx in &mapped.robots {
        let r = ctx.robot;
        if ctx.stationary {
            paths.push(GridPath::new(r, 0, vec![ctx.start_cell]));
            continue;
        }
        let route = routes
            .paths
            .iter()
            .find(|p| p.robot == r)
            .ok_or(ProjectError::MissingRoute { robot: r })?;

        // A vertex stands for its own cell except at the route's ends, where
        // the robot really occupies its start or goal cell.
        let anchor = |v: crate::topo::TopoVertexId| -> GridVertex {
            if v == ctx.start {
                ctx.start_cell
            } else if v == ctx.goal {
                ctx.goal_cell
            } else {
                topo.vertex(v).cell
            }
        };

        let mut cells: Vec<GridVertex> = vec![anchor(route.vertices[0])];
        for w in route.vertices.windows(2) {
            let (u, v) = (w[0], w[1]);
            let Some((p, _)) = edge_direction(topo, Some(ctx), u, v) else {
                return Err(ProjectError::NotAnEdge { robot: r, from: u.0, to: v.0 });
            };
            let passage = topo.passage(p);
            let (from, to) = (anchor(u), anchor(v));
            if from == to {
                continue;
            }
            let walk_dir = {
                let fp = passage.cell_position(from, topo).expect("anchor lies on its corridor");
                let tp = passage.cell_position(to, topo).expect("anchor lies on its corridor");
                if fp < tp {
                    Direction::AToB
                } else {
                    Direction::BToA
                }
            };
            if !directions.allows(p, walk_dir) {
                return Err(ProjectError::DirectionMismatch { robot: r, passage: p.0 });
            }
            cells.extend(passage.cells_between(from, to, topo).into_iter().skip(1));
        }
        paths.push(GridPath::new(r, 0, cells));
    }

    let crossings = topo
        .crossings
        .iter()
        .map(|&c| topo.vertex(c).cell)
        .collect();
    Ok(ProjectedPlan { paths, directions: directions.clone(), crossings })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionRobot {
    pub id: usize,
    pub cells: Vec<GridVertex>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionMeta {
    pub method: String,
    pub objective_kind: String,
    pub optimal: bool,
    pub nodes: u64,
    pub time_ms: u64,
    /// Cost the solver optimized, measured on the topological map.
    pub topo_objective: u32,
    /// The same objective over true grid walk lengths.
    pub grid_objective: u64,
}

/// On-disk solution: cell walks, one direction word per passage in id order
/// (`null` for unused free passages), the optimized objective, and metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionFile {
    pub robots: Vec<SolutionRobot>,
    pub passage_directions: Vec<Option<String>>,
    pub objective: u32,
    pub meta: SolutionMeta,
}

impl SolutionFile {
    pub fn new(plan: &ProjectedPlan, objective: u32, meta: SolutionMeta) -> Self {
        SolutionFile {
            robots: plan
                .paths
                .iter()
                .map(|p| SolutionRobot { id: p.robot, cells: p.cells.clone() })
                .collect(),
            passage_directions: plan
                .directions
                .0
                .iter()
                .map(|d| d.map(|d| d.as_str().to_string()))
                .collect(),
            objective,
            meta,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("solution serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Rebuilds the runtime plan; directions must use the same passage count
    /// as `topo`.
    pub fn into_plan(&self, topo: &TopoMap) -> Result<ProjectedPlan, String> {
        if self.passage_directions.len() != topo.passages.len() {
            return Err(format!(
                "{} direction entries for {} passages",
                self.passage_directions.len(),
                topo.passages.len()
            ));
        }
        let mut directions = PassageDirections::all_free(topo.passages.len());
        for (i, d) in self.passage_directions.iter().enumerate() {
            match d.as_deref() {
                None => {}
                Some("a_to_b") => directions.set(PassageId(i), Direction::AToB),
                Some("b_to_a") => directions.set(PassageId(i), Direction::BToA),
                Some(other) => return Err(format!("passage {i}: unknown direction {other:?}")),
            }
        }
        Ok(ProjectedPlan {
            paths: self
                .robots
                .iter()
                .map(|r| GridPath::new(r.id, 0, r.cells.clone()))
                .collect(),
            directions,
            crossings: topo.crossings.iter().map(|&c| topo.vertex(c).cell).collect(),
        })
    }
}

/// Convenience check used by tests and the audit: all steps are unit
/// Manhattan moves (Eq-style continuity) with no consecutive repeats.
pub fn is_unit_walk(map: &GridMap, path: &GridPath) -> bool {
    path.cells.iter().all(|&c| map.is_free(c))
        && path
            .cells
            .windows(2)
            .all(|w| w[0].manhattan(w[1]) == 1)
}
