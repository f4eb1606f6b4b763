use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use owip::bench::{preset_map, run_benchmark, BenchConfig};
use owip::bnb::{solve, SolveError, SolveOptions};
use owip::grid::{generate_instance, load_instance, save_instance, GridMap, Instance};
use owip::heuristic::{warm_start, dump_warmstart, OrientationRule};
use owip::ip::{build_model, decode_solution, export_lp, parse_assignment};
use owip::project::{project_paths, SolutionFile, SolutionMeta};
use owip::render::render_svg;
use owip::topo::{extract_topo, map_endpoints, split_identical_endpoints, ObjectiveKind};
use owip::validate::{certify, SimConfig};
use owip::{MappedInstance, TopoMap};

#[derive(Parser)]
#[command(
    name = "owip",
    version,
    about = "One-way path planning for robot fleets in narrow-aisle warehouses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Objective {
    /// Minimize the summed route length.
    Total,
    /// Minimize the longest single route.
    Max,
}

impl Objective {
    fn kind(self) -> ObjectiveKind {
        match self {
            Objective::Total => ObjectiveKind::Total,
            Objective::Max => ObjectiveKind::Max,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Objective::Total => "total",
            Objective::Max => "max",
        }
    }
}

/// Where the map and robots come from: a saved instance file, or a map plus
/// sampling parameters.
#[derive(Args)]
struct Source {
    /// Preset map name (fig1, paper, large) or path to an instance JSON.
    #[arg(long, default_value = "fig1")]
    map: String,
    /// Instance JSON carrying both the map and the robots; overrides --map.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Number of robots to sample when no instance file is given.
    #[arg(long, default_value_t = 2)]
    robots: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl Source {
    fn resolve(&self) -> Result<(GridMap, Instance)> {
        if let Some(path) = &self.instance {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            return load_instance(&text).map_err(|e| anyhow!("{}: {e}", path.display()));
        }
        let map = resolve_map(&self.map)?;
        let inst = generate_instance(&map, self.robots, self.seed)?;
        Ok((map, inst))
    }
}

fn resolve_map(name: &str) -> Result<GridMap> {
    if let Some(map) = preset_map(name) {
        return Ok(map);
    }
    let path = Path::new(name);
    if path.exists() {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let (map, _) = load_instance(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
        return Ok(map);
    }
    bail!("unknown map {name:?}: not a preset (fig1, paper, large) and no such file")
}

#[derive(Subcommand)]
enum Command {
    /// Sample a random instance and write it as JSON.
    Generate {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plan with warm-started branch and bound; writes a solution file.
    Plan {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum, default_value_t = Objective::Total)]
        objective: Objective,
        /// Prefer less-crowded crossings when route costs tie.
        #[arg(long)]
        congestion: bool,
        /// Give up on proving optimality after this many seconds.
        #[arg(long)]
        budget_seconds: Option<u64>,
        /// Print a machine-readable planning report to stdout.
        #[arg(long)]
        json: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the heuristic alone and write its plan in warm-start text form.
    Warmstart {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the routing integer program in LP text form.
    ExportLp {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum, default_value_t = Objective::Total)]
        objective: Objective,
        #[arg(long)]
        congestion: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decode an external solver's variable assignment into a solution file.
    ImportSolution {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum, default_value_t = Objective::Total)]
        objective: Objective,
        #[arg(long)]
        congestion: bool,
        /// Assignment text: one "variable value" pair per line.
        #[arg(long)]
        assignment: PathBuf,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit a solution file and replay it under randomized timing.
    Validate {
        /// Instance the solution was planned for.
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        solution: PathBuf,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Benchmark heuristic and solver over sampled instances; writes CSV.
    Bench {
        #[arg(long, default_value = "paper")]
        map: String,
        /// Robot count, or an inclusive range like 10..50.
        #[arg(long, default_value = "10")]
        robots: String,
        /// Stride through a robot count range.
        #[arg(long, default_value_t = 10)]
        step: usize,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Objective::Total)]
        objective: Objective,
        #[arg(long)]
        congestion: bool,
        #[arg(long)]
        budget_seconds: Option<u64>,
        /// Randomized-timing runs used to certify each row.
        #[arg(long, default_value_t = 20)]
        validation_runs: usize,
        /// Print JSON (rows plus failures) instead of CSV.
        #[arg(long)]
        json: bool,
        /// Path prefix; writes <out>.csv and <out>.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw the map, and optionally a solution's directions and paths.
    Render {
        #[arg(long, default_value = "fig1")]
        map: String,
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long)]
        solution: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn build_topology(map: &GridMap, inst: &Instance) -> (TopoMap, MappedInstance) {
    let topo = extract_topo(map);
    let mapped = map_endpoints(&topo, inst);
    split_identical_endpoints(&topo, &mapped)
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = match e.downcast_ref::<SolveError>() {
                Some(SolveError::Infeasible) => 3,
                _ => 1,
            };
            std::process::exit(code);
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Generate { source, out } => {
            let (map, inst) = source.resolve()?;
            emit(&out, &save_instance(&map, &inst))?;
            Ok(0)
        }
        Command::Plan { source, objective, congestion, budget_seconds, json, out } => {
            let (map, inst) = source.resolve()?;
            let started = Instant::now();
            let (topo, mapped) = build_topology(&map, &inst);
            let ws = warm_start(&topo, &mapped, OrientationRule::ArgMax);
            let options = SolveOptions {
                objective: objective.kind(),
                incumbent: Some(ws.paths.clone()),
                budget: budget_seconds.map(Duration::from_secs),
                congestion_bias: congestion,
            };
            let solution = solve(&topo, &mapped, &options)?;
            let time_ms = started.elapsed().as_millis() as u64;
            let plan = project_paths(&topo, &mapped, &solution.paths, &solution.directions)?;
            let meta = SolutionMeta {
                method: "bnb".into(),
                objective_kind: objective.name().into(),
                optimal: solution.optimal,
                nodes: solution.nodes,
                time_ms,
                topo_objective: solution.objective,
                grid_objective: plan.grid_objective(objective.kind()),
            };
            let file = SolutionFile::new(&plan, solution.objective, meta);
            emit(&out, &file.to_json())?;
            // The report goes to stdout only when it will not interleave
            // with the solution file itself.
            if json && out.is_some() {
                let report = serde_json::to_value(solution.report())?;
                println!("{report}");
            }
            eprintln!(
                "objective {} ({}), {} nodes, {} ms, optimal: {}",
                solution.objective,
                objective.name(),
                solution.nodes,
                time_ms,
                solution.optimal
            );
            Ok(0)
        }
        Command::Warmstart { source, json, out } => {
            let (map, inst) = source.resolve()?;
            let (topo, mapped) = build_topology(&map, &inst);
            let ws = warm_start(&topo, &mapped, OrientationRule::ArgMax);
            if json && out.is_some() {
                let report = serde_json::json!({
                    "total": ws.paths.objective(ObjectiveKind::Total),
                    "max": ws.paths.objective(ObjectiveKind::Max),
                    "ops": ws.ops,
                });
                println!("{report}");
            }
            emit(&out, &dump_warmstart(&topo, &ws))?;
            Ok(0)
        }
        Command::ExportLp { source, objective, congestion, out } => {
            let (map, inst) = source.resolve()?;
            let (topo, mapped) = build_topology(&map, &inst);
            let model = build_model(&topo, &mapped, objective.kind(), congestion);
            emit(&out, &export_lp(&model))?;
            Ok(0)
        }
        Command::ImportSolution { source, objective, congestion, assignment, json, out } => {
            let (map, inst) = source.resolve()?;
            let (topo, mapped) = build_topology(&map, &inst);
            let model = build_model(&topo, &mapped, objective.kind(), congestion);
            let text = fs::read_to_string(&assignment)
                .with_context(|| format!("reading {}", assignment.display()))?;
            let asg = parse_assignment(&model, &text)?;
            let decoded = decode_solution(&model, &asg)?;
            let plan = project_paths(&topo, &mapped, &decoded.paths, &decoded.directions)?;
            let topo_objective = decoded.paths.objective(objective.kind());
            let meta = SolutionMeta {
                method: "ip-import".into(),
                objective_kind: objective.name().into(),
                optimal: false,
                nodes: 0,
                time_ms: 0,
                topo_objective,
                grid_objective: plan.grid_objective(objective.kind()),
            };
            if json {
                let report = serde_json::json!({
                    "objective": topo_objective,
                    "model_objective": model.objective_value(&asg),
                });
                println!("{report}");
            }
            let file = SolutionFile::new(&plan, topo_objective, meta);
            emit(&out, &file.to_json())?;
            Ok(0)
        }
        Command::Validate { instance, solution, runs, seed, json, out } => {
            let text = fs::read_to_string(&instance)
                .with_context(|| format!("reading {}", instance.display()))?;
            let (map, _) = load_instance(&text).map_err(|e| anyhow!("{}: {e}", instance.display()))?;
            let topo = extract_topo(&map);
            let text = fs::read_to_string(&solution)
                .with_context(|| format!("reading {}", solution.display()))?;
            let file = SolutionFile::from_json(&text)
                .with_context(|| format!("parsing {}", solution.display()))?;
            let plan = file.into_plan(&topo).map_err(|e| anyhow!(e))?;
            let report = certify(&plan, &SimConfig { runs, seed, ..SimConfig::default() })?;
            let passed = report.passed();
            if json || out.is_some() {
                let mut text = serde_json::to_string_pretty(&report)?;
                text.push('\n');
                emit(&out, &text)?;
            }
            if !json {
                eprintln!(
                    "one-way audit: {}, {} runs, {} collisions, max crossing wait {}",
                    if report.static_oneway_ok { "ok" } else { "FAILED" },
                    report.sim.runs,
                    report.sim.collisions,
                    report.sim.max_crossing_wait
                );
            }
            Ok(if passed { 0 } else { 1 })
        }
        Command::Bench {
            map,
            robots,
            step,
            reps,
            seed,
            objective,
            congestion,
            budget_seconds,
            validation_runs,
            json,
            out,
        } => {
            let cfg = BenchConfig {
                map: resolve_map(&map)?,
                robot_counts: parse_counts(&robots, step)?,
                reps,
                seed,
                objective: objective.kind(),
                congestion_bias: congestion,
                budget: budget_seconds.map(Duration::from_secs),
                validation_runs,
            };
            let outcome = run_benchmark(&cfg);
            if !outcome.failures.is_empty() {
                eprintln!("{} row(s) failed certification", outcome.failures.len());
            }
            match &out {
                Some(prefix) => {
                    fs::write(prefix.with_extension("csv"), outcome.to_csv())?;
                    fs::write(prefix.with_extension("json"), outcome.to_json())?;
                }
                None => {
                    if json {
                        print!("{}", outcome.to_json());
                    } else {
                        print!("{}", outcome.to_csv());
                    }
                }
            }
            Ok(0)
        }
        Command::Render { map, instance, solution, out } => {
            let map = match &instance {
                Some(path) => {
                    let text = fs::read_to_string(path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    load_instance(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?.0
                }
                None => resolve_map(&map)?,
            };
            let topo = extract_topo(&map);
            let svg = match &solution {
                Some(path) => {
                    let text = fs::read_to_string(path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    let file = SolutionFile::from_json(&text)
                        .with_context(|| format!("parsing {}", path.display()))?;
                    let plan = file.into_plan(&topo).map_err(|e| anyhow!(e))?;
                    render_svg(&map, Some(&topo), Some(&plan.directions), &plan.paths)
                }
                None => render_svg(&map, Some(&topo), None, &[]),
            };
            emit(&out, &svg)?;
            Ok(0)
        }
    }
}

/// Parses "12" or an inclusive range "10..50" strided by `step`.
fn parse_counts(spec: &str, step: usize) -> Result<Vec<usize>> {
    if let Some((lo, hi)) = spec.split_once("..") {
        let lo: usize = lo.trim().parse().context("range start")?;
        let hi: usize = hi.trim().parse().context("range end")?;
        if lo > hi {
            bail!("empty robot range {spec:?}");
        }
        let step = step.max(1);
        return Ok((lo..=hi).step_by(step).collect());
    }
    Ok(vec![spec.trim().parse().context("robot count")?])
}
