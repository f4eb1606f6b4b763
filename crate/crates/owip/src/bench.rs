//! Benchmark harness: generates random instances, plans them with the
//! heuristic alone and with the full solver, certifies every plan, and
//! records objective, optimality ratio, and runtime per row. Rows whose plan
//! fails certification are reported as failures instead of silently dropped.

use std::time::{Duration, Instant};

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bnb::{solve, SolveOptions};
use crate::grid::{generate_instance, GridMap, Instance};
use crate::heuristic::{warm_start, OrientationRule};
use crate::project::{project_paths, ProjectedPlan};
use crate::topo::{extract_topo, map_endpoints, split_identical_endpoints, ObjectiveKind};
use crate::validate::{certify, optimality_ratio, SimConfig};

/// Built-in maps. `fig1` is the small demonstration layout, `paper` the
/// benchmark warehouse, `large` a wider one for scaling measurements.
pub fn preset_map(name: &str) -> Option<GridMap> {
    let map = match name {
        "fig1" => GridMap::new(7, 13, vec![1, 4, 7], vec![1, 7, 13]),
        "paper" => GridMap::new(19, 22, vec![1, 4, 7, 10, 13, 16, 19], vec![1, 8, 15, 22]),
        "large" => GridMap::new(
            25,
            43,
            vec![1, 4, 7, 10, 13, 16, 19, 22, 25],
            vec![1, 8, 15, 22, 29, 36, 43],
        ),
        _ => return None,
    };
    Some(map.expect("preset layouts are valid"))
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub map: GridMap,
    pub robot_counts: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub objective: ObjectiveKind,
    pub congestion_bias: bool,
    /// Solver budget per row; the warm start is always computed in full.
    pub budget: Option<Duration>,
    /// Randomized-timing runs used to certify each row's plan.
    pub validation_runs: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub rep: usize,
    pub method: String,
    /// Cost the method optimized, measured on the topological map. The
    /// ratio below is measured on grid walk lengths instead.
    pub objective: u64,
    pub ratio: f64,
    pub runtime_ms: u64,
    pub nodes: u64,
    pub optimal: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchFailure {
    pub n: usize,
    pub rep: usize,
    pub method: String,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct BenchOutcome {
    pub rows: Vec<BenchRow>,
    pub failures: Vec<BenchFailure>,
}

impl BenchOutcome {
    /// Raw rows as CSV; failures are excluded (they live in the JSON form).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,rep,method,objective,ratio,runtime_ms,nodes,optimal\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:.4},{},{},{}\n",
                r.n, r.rep, r.method, r.objective, r.ratio, r.runtime_ms, r.nodes, r.optimal
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("outcome serializes");
        s.push('\n');
        s
    }

    pub fn mean_ratio(&self, method: &str) -> Option<f64> {
        let rows: Vec<&BenchRow> = self.rows.iter().filter(|r| r.method == method).collect();
        if rows.is_empty() {
            return None;
        }
        Some(rows.iter().map(|r| r.ratio).sum::<f64>() / rows.len() as f64)
    }
}

struct Planned {
    plan: ProjectedPlan,
    objective: u64,
    runtime: Duration,
    nodes: u64,
    optimal: bool,
}

fn plan_instance(
    cfg: &BenchConfig,
    inst: &Instance,
    method: &str,
) -> Result<Planned, String> {
    let started = Instant::now();
    let topo = extract_topo(&cfg.map);
    let mapped = map_endpoints(&topo, inst);
    let (topo, mapped) = split_identical_endpoints(&topo, &mapped);
    let ws = warm_start(&topo, &mapped, OrientationRule::ArgMax);
    let planned = match method {
        "heuristic" => {
            let runtime = started.elapsed();
            let objective = ws.paths.objective(cfg.objective) as u64;
            let plan = project_paths(&topo, &mapped, &ws.paths, &ws.directions)
                .map_err(|e| e.to_string())?;
            Planned { plan, objective, runtime, nodes: 0, optimal: false }
        }
        "bnb" => {
            let options = SolveOptions {
                objective: cfg.objective,
                incumbent: Some(ws.paths.clone()),
                budget: cfg.budget,
                congestion_bias: cfg.congestion_bias,
            };
            let solution = solve(&topo, &mapped, &options).map_err(|e| e.to_string())?;
            let runtime = started.elapsed();
            let plan = project_paths(&topo, &mapped, &solution.paths, &solution.directions)
                .map_err(|e| e.to_string())?;
            Planned {
                plan,
                objective: solution.objective as u64,
                runtime,
                nodes: solution.nodes,
                optimal: solution.optimal,
            }
        }
        other => return Err(format!("unknown method {other:?}")),
    };
    Ok(planned)
}

/// Runs the full grid: for every robot count and repetition, generate an
/// instance, plan it with both methods, certify each plan, and record a row.
/// Row order is fixed by (robot count, rep, method).
pub fn run_benchmark(cfg: &BenchConfig) -> BenchOutcome {
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut outcome = BenchOutcome::default();
    for &n in &cfg.robot_counts {
        for rep in 0..cfg.reps {
            let inst_seed = master.next_u64();
            let inst = match generate_instance(&cfg.map, n, inst_seed) {
                Ok(inst) => inst,
                Err(e) => {
                    for method in ["heuristic", "bnb"] {
                        outcome.failures.push(BenchFailure {
                            n,
                            rep,
                            method: method.into(),
                            reason: e.to_string(),
                        });
                    }
                    continue;
                }
            };
            for method in ["heuristic", "bnb"] {
                let fail = |reason: String| BenchFailure { n, rep, method: method.into(), reason };
                match plan_instance(cfg, &inst, method) {
                    Ok(p) => {
                        let sim = SimConfig {
                            runs: cfg.validation_runs,
                            seed: inst_seed ^ 0x5eed,
                            ..SimConfig::default()
                        };
                        match certify(&p.plan, &sim) {
                            Ok(report) if report.passed() => outcome.rows.push(BenchRow {
                                n,
                                rep,
                                method: method.into(),
                                objective: p.objective,
                                ratio: optimality_ratio(&p.plan, &inst, &cfg.map, cfg.objective),
                                runtime_ms: p.runtime.as_millis() as u64,
                                nodes: p.nodes,
                                optimal: p.optimal,
                            }),
                            Ok(_) => outcome
                                .failures
                                .push(fail("plan failed feasibility certification".into())),
                            Err(e) => outcome.failures.push(fail(e.to_string())),
                        }
                    }
                    Err(reason) => outcome.failures.push(fail(reason)),
                }
            }
        }
    }
    outcome
}
