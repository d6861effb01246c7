use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use overwatch_core::dtg::{Node, TopoGraph};
use overwatch_core::fixtures;
use overwatch_core::graphgen::raster::read_grid;
use overwatch_core::harness::{
    ablation_suite, graph_dot, graph_svg, metric_report, plan_dot, plan_svg, raster_svg, read_json, run_pipeline_from,
    run_stages, write_json, Instance, NamedRoutes, PipelineConfig, RenderStyle, SolutionFile, Stage,
};
use overwatch_core::local_planner::{simulate_team, CostMap};
use overwatch_core::mid_level::allocate_routes;
use overwatch_core::milp::{build_gmip, build_milp, MilpModel, VarKind};
use overwatch_core::solver::{export_lp, solve_milp, Budget, MilpStatus};

/// Exit code for a solve that stopped with a plan but without an optimality proof.
const EXIT_UNPROVEN: u8 = 3;

#[derive(Parser)]
#[command(name = "overwatch", version, about = "Multi-robot overwatch planning pipeline")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write the default pipeline config.
    InitConfig {
        #[arg(long, default_value = "config.json")]
        out: PathBuf,
    },
    /// Terrain, visibility, regions, paths and the refined graph.
    GenGraph {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Build the occupancy model and write it as JSON.
    BuildModel {
        #[command(flatten)]
        src: InstanceArgs,
        #[arg(long, value_enum, default_value_t = Formulation::Milp)]
        formulation: Formulation,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the model in LP format.
    ExportLp {
        #[command(flatten)]
        src: InstanceArgs,
        #[arg(long, value_enum, default_value_t = Formulation::Milp)]
        formulation: Formulation,
        #[arg(long, default_value = "model.lp")]
        out: PathBuf,
    },
    /// Branch and bound on the model; exits 3 if the plan is not proven optimal.
    Solve {
        #[command(flatten)]
        src: InstanceArgs,
        #[arg(long, value_enum, default_value_t = Formulation::Milp)]
        formulation: Formulation,
        #[arg(long, default_value_t = 60.0)]
        time_limit: f64,
        #[arg(long)]
        max_nodes: Option<u64>,
        #[arg(long, default_value = "solution.json")]
        out: PathBuf,
    },
    /// Split a solved plan into per-robot routes.
    Allocate {
        #[command(flatten)]
        src: InstanceArgs,
        #[arg(long)]
        solution: PathBuf,
        #[arg(long, default_value = "routes.json")]
        out: PathBuf,
    },
    /// Drive the routes with the local planner.
    Simulate {
        #[command(flatten)]
        src: InstanceArgs,
        #[arg(long)]
        routes: PathBuf,
        /// Simulation parameters are taken from this pipeline config.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Raster whose nonzero cells are lethal.
        #[arg(long)]
        obstacles: Option<PathBuf>,
        /// Raster whose nonzero cells count as cover.
        #[arg(long)]
        cover: Option<PathBuf>,
        /// Multiply node coordinates, for fixtures drawn at unit scale.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value = "sim")]
        out: PathBuf,
    },
    /// Protection metric of a simulator protection log.
    Metric {
        #[arg(long)]
        protection: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// SVG or DOT by output extension; raster > plan > graph.
    Render {
        #[command(flatten)]
        src: InstanceArgs,
        #[arg(long)]
        routes: Option<PathBuf>,
        #[arg(long)]
        raster: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the four feature variants.
    Ablate {
        #[command(flatten)]
        src: InstanceArgs,
        #[arg(long, default_value_t = 60.0)]
        time_limit: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Model sizes for the reference shapes and fixture solve times.
    Bench {
        #[arg(long, default_value_t = 3)]
        repeat: usize,
        #[arg(long, default_value_t = 60.0)]
        time_limit: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full pipeline, optionally resuming at a stage.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_parser = parse_stage, default_value = "terrain")]
        from: Stage,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Formulation {
    Milp,
    Gmip,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fixture {
    Illustrative,
    Bounding,
    Leapfrog,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct InstanceArgs {
    /// Instance JSON (graph plus scenario).
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long, value_enum)]
    fixture: Option<Fixture>,
}

impl InstanceArgs {
    fn load(&self) -> Result<Instance> {
        if let Some(p) = &self.instance {
            return read_json(p).map_err(|e| anyhow!(e));
        }
        let (graph, scenario) = match self.fixture.expect("clap enforces one source") {
            Fixture::Illustrative => fixtures::illustrative(),
            Fixture::Bounding => fixtures::bounding(),
            Fixture::Leapfrog => fixtures::leapfrog(),
        };
        Ok(Instance { graph, scenario })
    }
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// DEM file (.asc or .f32 with sidecar).
    #[arg(long)]
    dem: Option<PathBuf>,
    #[arg(long)]
    obstacles: Option<PathBuf>,
    #[arg(long)]
    robots: Option<u32>,
    #[arg(long)]
    horizon: Option<u32>,
    #[arg(long)]
    goal_count: Option<u32>,
    #[arg(long)]
    time_weight: Option<f64>,
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    skip_simulation: bool,
    /// Any other config field, as dotted.path=json (e.g. refine.max_ow_dist=20).
    #[arg(long = "set", value_name = "PATH=VALUE")]
    sets: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let base = match &self.config {
            Some(p) => read_json::<PipelineConfig>(p).map_err(|e| anyhow!(e))?,
            None => PipelineConfig::default(),
        };
        let mut v = serde_json::to_value(base)?;
        let mut put = |path: &str, val: Value| set_path(&mut v, path, val);
        if let Some(s) = self.seed {
            put("seed", s.into())?;
        }
        if let Some(p) = &self.dem {
            let obstacles = self.obstacles.as_ref().map(|o| o.display().to_string());
            put("dem", serde_json::json!({ "kind": "file", "path": p, "obstacles": obstacles }))?;
        } else if self.obstacles.is_some() {
            bail!("--obstacles needs --dem");
        }
        if let Some(n) = self.robots {
            put("scenario.n_robots", n.into())?;
        }
        if let Some(h) = self.horizon {
            put("scenario.horizon", h.into())?;
        }
        if let Some(g) = self.goal_count {
            put("scenario.goal_count", g.into())?;
        }
        if let Some(w) = self.time_weight {
            put("scenario.time_weight", w.into())?;
        }
        if let Some(t) = self.time_limit {
            put("solver.time_limit_s", t.into())?;
        }
        if self.skip_simulation {
            put("skip_simulation", true.into())?;
        }
        for s in &self.sets {
            let (path, raw) = s.split_once('=').ok_or_else(|| anyhow!("--set expects PATH=VALUE, got {s:?}"))?;
            let val = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            put(path, val)?;
        }
        let cfg: PipelineConfig = serde_json::from_value(v).context("config after overrides")?;
        if let overwatch_core::harness::DemSource::File { path, obstacles } = &cfg.dem {
            for p in std::iter::once(path).chain(obstacles) {
                if !p.exists() {
                    bail!("{} does not exist", p.display());
                }
            }
        }
        Ok(cfg)
    }
}

fn set_path(root: &mut Value, path: &str, val: Value) -> Result<()> {
    let mut cur = root;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, k) in keys.iter().enumerate() {
        let obj = cur.as_object_mut().ok_or_else(|| anyhow!("{path}: {k} is not inside an object"))?;
        if i + 1 == keys.len() {
            if !obj.contains_key(*k) {
                bail!("unknown config field {path}");
            }
            obj.insert(k.to_string(), val);
            return Ok(());
        }
        cur = obj.get_mut(*k).ok_or_else(|| anyhow!("unknown config field {path}"))?;
    }
    unreachable!("split yields at least one key")
}

fn parse_stage(s: &str) -> Result<Stage, String> {
    Stage::parse(s).ok_or_else(|| {
        let names: Vec<&str> = Stage::ALL.iter().map(|s| s.name()).collect();
        format!("unknown stage {s:?}; expected one of {}", names.join(", "))
    })
}

fn build(inst: &Instance, f: Formulation) -> Result<MilpModel> {
    let m = match f {
        Formulation::Milp => build_milp(&inst.graph, &inst.scenario),
        Formulation::Gmip => build_gmip(&inst.graph, &inst.scenario),
    };
    Ok(m?)
}

fn save_json<T: serde::Serialize>(path: &Path, v: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_json(path, v).map_err(|e| anyhow!(e))
}

fn save_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).with_context(|| path.display().to_string())
}

fn scaled(g: &TopoGraph, k: f64) -> Result<TopoGraph> {
    let nodes = g.nodes().iter().map(|n| Node { id: n.id, x: n.x * k, y: n.y * k }).collect();
    let edges = g.locations().iter().copied().filter(|l| l.0 != l.1).collect();
    let paths = g.edge_paths().iter().map(|(&l, p)| (l, p.iter().map(|q| [q[0] * k, q[1] * k]).collect())).collect();
    Ok(TopoGraph::new(nodes, edges, paths, g.overwatch().to_vec())?)
}

fn run(cmd: Cmd) -> Result<u8> {
    match cmd {
        Cmd::InitConfig { out } => {
            save_json(&out, &PipelineConfig::default())?;
            println!("wrote {}", out.display());
        }
        Cmd::GenGraph { cfg, out } => {
            let cfg = cfg.resolve()?;
            let b = run_stages(&cfg, &out, Stage::Terrain, Stage::Validate)?;
            let inst: Instance = read_json(&out.join("instance.json")).map_err(|e| anyhow!(e))?;
            println!(
                "graph: {} nodes, {} edges, {} overwatch opportunities ({} files in {})",
                inst.graph.num_nodes(),
                inst.graph.num_edges(),
                inst.graph.overwatch().len(),
                b.files.len(),
                out.display()
            );
        }
        Cmd::BuildModel { src, formulation, out } => {
            let m = build(&src.load()?, formulation)?;
            let ints = m.variables.iter().filter(|v| v.kind != VarKind::Continuous).count();
            println!(
                "{}: {} variables ({} integer), {} constraints",
                m.name,
                m.variables.len(),
                ints,
                m.constraints.len()
            );
            if let Some(p) = out {
                save_json(&p, &m)?;
            }
        }
        Cmd::ExportLp { src, formulation, out } => {
            let m = build(&src.load()?, formulation)?;
            save_text(&out, &export_lp(&m))?;
            println!("wrote {} ({} variables)", out.display(), m.variables.len());
        }
        Cmd::Solve { src, formulation, time_limit, max_nodes, out } => {
            let m = build(&src.load()?, formulation)?;
            let mut budget = Budget::seconds(time_limit);
            if let Some(n) = max_nodes {
                budget.max_nodes = n;
            }
            let r = solve_milp(&m, budget);
            let file = SolutionFile {
                status: r.status,
                objective: r.objective,
                bound: r.bound,
                solution: r.incumbent.clone(),
            };
            save_json(&out, &file)?;
            println!(
                "status {:?} objective {:.6} bound {:.6} nodes {} time {:.3}s",
                r.status,
                r.objective,
                r.bound,
                r.nodes_explored,
                r.wall_time.as_secs_f64()
            );
            match r.status {
                MilpStatus::Optimal => {}
                _ if file.solution.is_some() => return Ok(EXIT_UNPROVEN),
                s => bail!("no plan found ({s:?})"),
            }
        }
        Cmd::Allocate { src, solution, out } => {
            let inst = src.load()?;
            let sol: SolutionFile = read_json(&solution).map_err(|e| anyhow!(e))?;
            let p = sol.solution.ok_or_else(|| anyhow!("{} has no plan", solution.display()))?.p;
            let routes = allocate_routes(&inst.graph, &p, inst.scenario.n_robots)?;
            let robots = (1..=routes.n_robots()).map(|i| format!("r{i:02}")).collect();
            save_json(&out, &NamedRoutes { robots, routes })?;
            println!("wrote {} routes to {}", inst.scenario.n_robots, out.display());
        }
        Cmd::Simulate { src, routes, config, seed, obstacles, cover, scale, out } => {
            let inst = src.load()?;
            let graph = if scale == 1.0 { inst.graph } else { scaled(&inst.graph, scale)? };
            let named: NamedRoutes = read_json(&routes).map_err(|e| anyhow!(e))?;
            let mut params = match config {
                Some(p) => read_json::<PipelineConfig>(&p).map_err(|e| anyhow!(e))?.sim,
                None => PipelineConfig::default().sim,
            };
            if let Some(s) = seed {
                params.seed = s;
            }
            let costmap = match obstacles {
                Some(p) => {
                    let g = read_grid(&p).with_context(|| p.display().to_string())?;
                    let m = g.to_mask();
                    Some(CostMap {
                        grid: overwatch_core::graphgen::Grid {
                            geom: m.geom,
                            data: m.data.iter().map(|&b| if b { 255 } else { 0 }).collect(),
                        },
                    })
                }
                None => None,
            };
            let cover = match cover {
                Some(p) => Some(read_grid(&p).with_context(|| p.display().to_string())?.to_mask()),
                None => None,
            };
            let log = simulate_team(&graph, &named.routes, &named.robots, costmap.as_ref(), cover.as_ref(), &params)?;
            fs::create_dir_all(&out)?;
            save_text(&out.join("sim_log.jsonl"), &log.to_jsonl())?;
            save_json(&out.join("sim_events.json"), &log.events)?;
            save_json(&out.join("protection.json"), &log.protection)?;
            println!(
                "{} ticks, {} events, {} timeouts, min coalition distance {}",
                log.records.iter().map(|r| r.tick + 1).max().unwrap_or(0),
                log.events.len(),
                log.timeouts(),
                log.min_coalition_distance().map_or("-".into(), |d| format!("{d:.3}"))
            );
            if log.timeouts() > 0 {
                bail!("{} robot steps timed out", log.timeouts());
            }
        }
        Cmd::Metric { protection, out } => {
            let log = read_json(&protection).map_err(|e| anyhow!(e))?;
            let report = metric_report(&log)?;
            for (r, v) in &report.per_robot {
                println!("{r} {v:.4}");
            }
            if !report.idle.is_empty() {
                println!("idle: {}", report.idle.join(" "));
            }
            println!("protection {:.4}", report.protection);
            if let Some(p) = out {
                save_json(&p, &report)?;
            }
        }
        Cmd::Render { src, routes, raster, out } => {
            let inst = src.load()?;
            let style = RenderStyle::default();
            let dot = match out.extension().and_then(|e| e.to_str()) {
                Some("dot") => true,
                Some("svg") => false,
                _ => bail!("output must end in .svg or .dot"),
            };
            let routes: Option<NamedRoutes> = routes.map(|p| read_json(&p).map_err(|e| anyhow!(e))).transpose()?;
            let text = match (raster, routes) {
                (Some(_), _) if dot => bail!("rasters render to SVG only"),
                (Some(p), _) => raster_svg(&read_grid(&p).with_context(|| p.display().to_string())?, style),
                (None, Some(r)) if dot => plan_dot(&inst.graph, &r.routes),
                (None, Some(r)) => plan_svg(&inst.graph, &r.routes, style),
                (None, None) if dot => graph_dot(&inst.graph),
                (None, None) => graph_svg(&inst.graph, style),
            };
            save_text(&out, &text)?;
            println!("wrote {}", out.display());
        }
        Cmd::Ablate { src, time_limit, out } => {
            let inst = src.load()?;
            let report = ablation_suite(&inst.graph, &inst.scenario, Budget::seconds(time_limit))?;
            println!("variant status     objective  overwatch  moving");
            for v in &report.variants {
                let obj = v.objective.map_or("-".to_string(), |o| format!("{o:.4}"));
                println!(
                    "{:<7} {:<10} {:>9}  {:>9}  {:>6}",
                    v.variant.label(),
                    format!("{:?}", v.status),
                    obj,
                    v.overwatch_positions,
                    v.moving_robots
                );
            }
            if let Some(p) = out {
                save_json(&p, &report)?;
            }
            if report.variants.iter().any(|v| v.status != MilpStatus::Optimal) {
                return Ok(EXIT_UNPROVEN);
            }
        }
        Cmd::Bench { repeat, time_limit, out } => return bench(repeat.max(1), time_limit, out),
        Cmd::Run { cfg, out, from } => {
            let cfg = cfg.resolve()?;
            let b = run_pipeline_from(&cfg, &out, from)?;
            println!(
                "status {} objective {} protection {} ({} files in {})",
                b.status.map_or("-".into(), |s| format!("{s:?}")),
                b.objective.map_or("-".into(), |o| format!("{o:.4}")),
                b.protection.map_or("-".into(), |p| format!("{p:.4}")),
                b.files.len(),
                out.display()
            );
            if b.status.is_some_and(|s| s != MilpStatus::Optimal) {
                return Ok(EXIT_UNPROVEN);
            }
        }
    }
    Ok(0)
}

fn bench(repeat: usize, time_limit: f64, out: Option<PathBuf>) -> Result<u8> {
    let mut rows = Vec::new();
    println!("shape               vars  constraints  build_ms");
    for (n_v, pairs, n_o, h) in fixtures::MODEL_SHAPES {
        let (g, s) = fixtures::shape_graph(n_v, pairs, n_o, h);
        let t = Instant::now();
        let m = build_milp(&g, &s)?;
        let ms = t.elapsed().as_secs_f64() * 1e3;
        let label = format!("L{} O{} T{}", g.num_locations(), n_o, h);
        println!("{label:<18} {:>5}  {:>11}  {ms:>8.3}", m.variables.len(), m.constraints.len());
        rows.push(serde_json::json!({
            "shape": label, "variables": m.variables.len(), "constraints": m.constraints.len(), "build_ms": ms,
        }));
    }
    let mut solves = Vec::new();
    let mut unproven = false;
    println!("fixture        status      objective   mean_s   max_s");
    for (name, (g, s)) in [
        ("illustrative", fixtures::illustrative()),
        ("bounding", fixtures::bounding()),
        ("leapfrog", fixtures::leapfrog()),
    ] {
        let m = build_milp(&g, &s)?;
        let mut times = Vec::with_capacity(repeat);
        let mut last = None;
        for _ in 0..repeat {
            let r = solve_milp(&m, Budget::seconds(time_limit));
            times.push(r.wall_time.as_secs_f64());
            last = Some(r);
        }
        let r = last.expect("repeat >= 1");
        unproven |= r.status != MilpStatus::Optimal;
        let mean = times.iter().sum::<f64>() / times.len() as f64;
        let max = times.iter().copied().fold(0.0, f64::max);
        println!("{name:<14} {:<10} {:>10.4} {mean:>8.3} {max:>7.3}", format!("{:?}", r.status), r.objective);
        solves.push(serde_json::json!({
            "fixture": name, "status": r.status, "objective": r.objective, "mean_s": mean, "max_s": max, "repeat": repeat,
        }));
    }
    if let Some(p) = out {
        save_json(&p, &serde_json::json!({ "models": rows, "solves": solves }))?;
    }
    Ok(if unproven { EXIT_UNPROVEN } else { 0 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
