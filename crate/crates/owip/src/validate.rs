//! Certifies plans: a static audit proving every shared grid edge is used in
//! one direction only, and a randomized-timing simulator exercising the
//! crossing waiting rule. A plan that passes the audit stays collision-free
//! under every release and dwell schedule; the simulator checks that claim
//! empirically and reports timing statistics.

use std::collections::BTreeMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{grid_shortest_path, GridMap, GridVertex, Instance};
use crate::project::ProjectedPlan;
use crate::topo::ObjectiveKind;

/// Undirected grid edge traversed in both directions; `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeViolation {
    pub a: GridVertex,
    pub b: GridVertex,
}

/// Checks that every grid edge used by at least one robot is traversed in a
/// single direction across the whole plan. Returns the offending edges in
/// cell order; empty means the plan is one-way consistent.
pub fn static_oneway_audit(plan: &ProjectedPlan) -> Vec<EdgeViolation> {
    // Senses seen per undirected edge: key is the smaller cell, value
    // records (low -> high, high -> low) usage.
    let mut seen: BTreeMap<(GridVertex, GridVertex), (bool, bool)> = BTreeMap::new();
    for path in &plan.paths {
        for w in path.cells.windows(2) {
            let (from, to) = (w[0], w[1]);
            if from == to {
                continue;
            }
            let key = (from.min(to), from.max(to));
            let entry = seen.entry(key).or_insert((false, false));
            if from < to {
                entry.0 = true;
            } else {
                entry.1 = true;
            }
        }
    }
    seen.into_iter()
        .filter(|(_, (fwd, bwd))| *fwd && *bwd)
        .map(|((a, b), _)| EdgeViolation { a, b })
        .collect()
}

/// Timing model for the simulator. `None` fields fall back to the random
/// model: release uniform in [0, 5n], dwell per step uniform in {1..3}.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub runs: usize,
    pub seed: u64,
    /// When true, robots queue behind occupied cells and wait at occupied
    /// crossings; when false they commit moves unconditionally.
    pub controller: bool,
    pub fixed_dwell: Option<u64>,
    pub releases: Option<Vec<u64>>,
    /// Consecutive ticks without any spawn, move, or finish before the run
    /// is declared deadlocked.
    pub stall_limit: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            runs: 1,
            seed: 0,
            controller: true,
            fixed_dwell: None,
            releases: None,
            stall_limit: 32,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimReport {
    pub runs: usize,
    /// Collision events (meets plus head-on swaps) summed over all runs.
    pub collisions: u64,
    /// Longest streak of ticks any robot spent blocked at a crossing.
    pub max_crossing_wait: u64,
    pub run_seeds: Vec<u64>,
    pub mean_makespan: f64,
    pub mean_total_time: f64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("deadlock in run {run} (seed {seed}): no progress since tick {tick}")]
    DeadlockDetected { run: usize, seed: u64, tick: u64 },
}

struct Agent {
    cells: Vec<GridVertex>,
    release: u64,
    /// Index into `cells`; meaningful once spawned.
    at: usize,
    ready_at: u64,
    spawned: bool,
    done: bool,
    finish: u64,
    wait_streak: u64,
}

struct RunStats {
    collisions: u64,
    max_crossing_wait: u64,
    makespan: u64,
    total_time: u64,
}

fn run_once(plan: &ProjectedPlan, cfg: &SimConfig, seed: u64) -> Result<RunStats, (u64, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = plan.paths.len();
    let release_cap = 5 * n as u64;
    let dwell = {
        let fixed = cfg.fixed_dwell;
        move |rng: &mut ChaCha8Rng| fixed.unwrap_or_else(|| rng.gen_range(1..=3))
    };

    let mut agents: Vec<Agent> = plan
        .paths
        .iter()
        .enumerate()
        .map(|(i, p)| Agent {
            cells: p.cells.clone(),
            release: match &cfg.releases {
                Some(r) => r[i],
                None => rng.gen_range(0..=release_cap),
            },
            at: 0,
            ready_at: 0,
            spawned: false,
            done: false,
            finish: 0,
            wait_streak: 0,
        })
        .collect();

    // Occupancy counts; under the controller every count stays <= 1, without
    // it meets pile up and the detector below reports them.
    let mut occupied: BTreeMap<GridVertex, u32> = BTreeMap::new();
    let mut stats = RunStats { collisions: 0, max_crossing_wait: 0, makespan: 0, total_time: 0 };
    let mut t: u64 = 0;
    let mut stalled: u64 = 0;

    while agents.iter().any(|a| !a.done) {
        // Nobody on the board: jump to the next release.
        if agents.iter().all(|a| a.done || !a.spawned) {
            let next = agents
                .iter()
                .filter(|a| !a.done)
                .map(|a| a.release)
                .min()
                .expect("some agent pending");
            t = t.max(next);
            stalled = 0;
        }

        let mut progress = false;
        let prev: Vec<Option<GridVertex>> = agents
            .iter()
            .map(|a| (a.spawned && !a.done).then(|| a.cells[a.at]))
            .collect();

        for a in &mut agents {
            if a.done {
                continue;
            }
            if !a.spawned {
                if t < a.release {
                    continue;
                }
                let cell = a.cells[0];
                if cfg.controller && occupied.get(&cell).copied().unwrap_or(0) > 0 {
                    continue;
                }
                a.spawned = true;
                progress = true;
                if a.cells.len() == 1 {
                    // Start equals goal: the robot arrives the instant it
                    // appears and is no obstacle afterwards.
                    a.done = true;
                    a.finish = t;
                } else {
                    *occupied.entry(cell).or_insert(0) += 1;
                    a.ready_at = t + dwell(&mut rng);
                }
                continue;
            }
            if t < a.ready_at {
                continue;
            }
            let target = a.cells[a.at + 1];
            if cfg.controller && occupied.get(&target).copied().unwrap_or(0) > 0 {
                if plan.crossings.contains(&target) {
                    a.wait_streak += 1;
                    stats.max_crossing_wait = stats.max_crossing_wait.max(a.wait_streak);
                }
                continue;
            }
            let from = a.cells[a.at];
            *occupied.get_mut(&from).expect("agent cell occupied") -= 1;
            a.at += 1;
            a.wait_streak = 0;
            progress = true;
            if a.at == a.cells.len() - 1 {
                // Goal reached; the robot vanishes and stops being an
                // obstacle, so no occupancy for the goal cell.
                a.done = true;
                a.finish = t;
            } else {
                *occupied.entry(target).or_insert(0) += 1;
                a.ready_at = t + dwell(&mut rng);
            }
        }

        // Detection is independent of the controller: compare committed
        // positions pairwise for meets and swaps.
        for i in 0..agents.len() {
            let (Some(pi), Some(ci)) = (prev[i], cur(&agents[i])) else { continue };
            for j in i + 1..agents.len() {
                let (Some(pj), Some(cj)) = (prev[j], cur(&agents[j])) else { continue };
                let meet = ci == cj;
                let head_on = ci == pj && cj == pi;
                if meet || head_on {
                    stats.collisions += 1;
                }
            }
        }

        if progress {
            stalled = 0;
        } else {
            stalled += 1;
            if stalled > cfg.stall_limit {
                return Err((seed, t));
            }
        }
        t += 1;
    }

    for a in &agents {
        stats.makespan = stats.makespan.max(a.finish);
        stats.total_time += a.finish - a.release;
    }
    Ok(stats)
}

fn cur(a: &Agent) -> Option<GridVertex> {
    (a.spawned && !a.done).then(|| a.cells[a.at])
}

/// Replays the plan `cfg.runs` times under randomized timing. Every run is
/// deterministic given its recorded seed.
pub fn simulate_execution(plan: &ProjectedPlan, cfg: &SimConfig) -> Result<SimReport, SimError> {
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = SimReport {
        runs: cfg.runs,
        collisions: 0,
        max_crossing_wait: 0,
        run_seeds: Vec::with_capacity(cfg.runs),
        mean_makespan: 0.0,
        mean_total_time: 0.0,
    };
    for run in 0..cfg.runs {
        let seed = master.next_u64();
        report.run_seeds.push(seed);
        match run_once(plan, cfg, seed) {
            Ok(stats) => {
                report.collisions += stats.collisions;
                report.max_crossing_wait = report.max_crossing_wait.max(stats.max_crossing_wait);
                report.mean_makespan += stats.makespan as f64;
                report.mean_total_time += stats.total_time as f64;
            }
            Err((seed, tick)) => return Err(SimError::DeadlockDetected { run, seed, tick }),
        }
    }
    if cfg.runs > 0 {
        report.mean_makespan /= cfg.runs as f64;
        report.mean_total_time /= cfg.runs as f64;
    }
    Ok(report)
}

/// Negative control: disables the waiting controller and aligns two robots'
/// releases so they reach their first shared cell on the same tick. Returns
/// `None` when no two paths share a cell (nothing to collide).
pub fn adversarial_collision(plan: &ProjectedPlan) -> Option<SimReport> {
    let paths = &plan.paths;
    let mut found: Option<(usize, usize, u64, u64)> = None;
    'outer: for i in 0..paths.len() {
        for j in i + 1..paths.len() {
            // A robot on its goal cell has already vanished, so only cells
            // both robots pass through in transit can produce a meet.
            for (si, ci) in paths[i].cells.iter().enumerate() {
                if si + 1 == paths[i].cells.len() {
                    break;
                }
                let hit = paths[j]
                    .cells
                    .iter()
                    .position(|cj| cj == ci)
                    .filter(|&sj| sj + 1 < paths[j].cells.len());
                if let Some(sj) = hit {
                    found = Some((i, j, si as u64, sj as u64));
                    break 'outer;
                }
            }
        }
    }
    let (i, j, si, sj) = found?;
    // With dwell 1 and no blocking, a robot released at r sits on cell k at
    // tick r + k; shift the earlier arrival to meet the later one.
    let mut releases = vec![0u64; paths.len()];
    releases[i] = sj.saturating_sub(si);
    releases[j] = si.saturating_sub(sj);
    let cfg = SimConfig {
        runs: 1,
        seed: 0,
        controller: false,
        fixed_dwell: Some(1),
        releases: Some(releases),
        ..SimConfig::default()
    };
    Some(simulate_execution(plan, &cfg).expect("controller-free runs cannot deadlock"))
}

/// Plan cost over the collision-ignoring per-robot shortest paths. A zero
/// lower bound (every robot already home) is reported as ratio 1.
pub fn optimality_ratio(
    plan: &ProjectedPlan,
    inst: &Instance,
    map: &GridMap,
    kind: ObjectiveKind,
) -> f64 {
    let mut bound: u64 = 0;
    for robot in &inst.robots {
        let free = grid_shortest_path(map, robot.start, robot.goal)
            .map(|p| (p.len() - 1) as u64)
            .unwrap_or(0);
        bound = match kind {
            ObjectiveKind::Total => bound + free,
            ObjectiveKind::Max => bound.max(free),
        };
    }
    if bound == 0 {
        return 1.0;
    }
    plan.grid_objective(kind) as f64 / bound as f64
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub static_oneway_ok: bool,
    pub violations: Vec<EdgeViolation>,
    pub sim: SimReport,
}

impl FeasibilityReport {
    pub fn passed(&self) -> bool {
        self.static_oneway_ok && self.sim.collisions == 0
    }
}

/// Full certificate: audit first, then simulate. A plan that fails the audit
/// is reported without simulation (its runs field reads 0).
pub fn certify(plan: &ProjectedPlan, cfg: &SimConfig) -> Result<FeasibilityReport, SimError> {
    let violations = static_oneway_audit(plan);
    let sim = if violations.is_empty() {
        simulate_execution(plan, cfg)?
    } else {
        SimReport {
            runs: 0,
            collisions: 0,
            max_crossing_wait: 0,
            run_seeds: vec![],
            mean_makespan: 0.0,
            mean_total_time: 0.0,
        }
    };
    Ok(FeasibilityReport { static_oneway_ok: violations.is_empty(), violations, sim })
}
