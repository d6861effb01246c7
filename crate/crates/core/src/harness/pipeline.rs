//! End-to-end run from terrain to protection metric, one persisted artifact
//! set per stage.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use thiserror::Error;

use super::metric::{protection_metric, ProtectionLog};
use super::render::{graph_dot, graph_svg, plan_dot, plan_svg, raster_svg, RenderStyle};
use crate::dtg::{validate, LocCount, NodeId, Scenario, TopoGraph};
use crate::graphgen::raster::{read_grid, write_f32, ElevationGrid, Grid, Mask};
use crate::graphgen::{
    generate_graph, refine_graph, synthetic_meadow, GraphGenParams, ObserverDistribution, RawGraph, RefineParams,
    VisibilityMap,
};
use crate::local_planner::{simulate_team, CostMap, SimParams};
use crate::mid_level::{allocate_routes, RobotRoutes};
use crate::milp::{build_milp, OccupancySolution};
use crate::solver::{export_lp, solve_milp, Budget, MilpStatus};

/// Graph plus scenario as one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub graph: TopoGraph,
    pub scenario: Scenario,
}

/// Routes with the robot names used by the simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedRoutes {
    pub robots: Vec<String>,
    #[serde(flatten)]
    pub routes: RobotRoutes,
}

/// Solver outcome without timing, so reruns compare byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub status: MilpStatus,
    pub objective: f64,
    pub bound: f64,
    pub solution: Option<OccupancySolution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DemSource {
    /// `.asc` or raw float32 with a JSON sidecar; obstacles are cells with
    /// nonzero value in the optional obstacle raster.
    File {
        path: PathBuf,
        obstacles: Option<PathBuf>,
    },
    Synthetic {
        width: usize,
        height: usize,
        resolution: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n_robots: u32,
    /// World positions; the nearest graph node is used.
    pub start: [f64; 2],
    pub goal: [f64; 2],
    pub goal_count: u32,
    pub horizon: u32,
    pub time_weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub time_limit_s: f64,
    pub max_nodes: u64,
}

impl SolverConfig {
    pub fn budget(&self) -> Budget {
        Budget { time: std::time::Duration::from_secs_f64(self.time_limit_s), max_nodes: self.max_nodes }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub dem: DemSource,
    pub observers: ObserverDistribution,
    pub graphgen: GraphGenParams,
    pub refine: RefineParams,
    pub scenario: ScenarioConfig,
    pub solver: SolverConfig,
    pub sim: SimParams,
    /// Skip the simulate and metric stages.
    pub skip_simulation: bool,
    /// Overrides the graphgen and simulation seeds.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let (w, h, res) = (64, 48, 2.0);
        let mut sim = SimParams::default();
        sim.mppi.samples = 64;
        sim.mppi.horizon = 20;
        Self {
            dem: DemSource::Synthetic { width: w, height: h, resolution: res, seed: 7 },
            observers: ObserverDistribution::gaussian([96.0, 48.0], [[100.0, 0.0], [0.0, 100.0]], 1.7),
            graphgen: GraphGenParams {
                samples: 6,
                nu: 0.3,
                xi_min: 10,
                xi_max: 200,
                d_max: 150.0,
                ow_d_max: 80.0,
                ..GraphGenParams::default()
            },
            refine: RefineParams {
                max_edge_len: 70.0,
                max_ow_dist: 30.0,
                length_weight: 0.1,
                formation_size: 2,
                formation_penalty: 4.0,
                formation_reward: 1.0,
                ..RefineParams::default()
            },
            scenario: ScenarioConfig {
                n_robots: 4,
                start: [0.0, 0.0],
                goal: [w as f64 * res, h as f64 * res],
                goal_count: 2,
                horizon: 8,
                time_weight: 1.0,
            },
            solver: SolverConfig { time_limit_s: 60.0, max_nodes: u64::MAX },
            sim,
            skip_simulation: false,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Terrain,
    Graph,
    Refine,
    Validate,
    Model,
    Solve,
    Allocate,
    Simulate,
    Metric,
    Render,
}

impl Stage {
    pub const ALL: [Stage; 10] = [
        Stage::Terrain,
        Stage::Graph,
        Stage::Refine,
        Stage::Validate,
        Stage::Model,
        Stage::Solve,
        Stage::Allocate,
        Stage::Simulate,
        Stage::Metric,
        Stage::Render,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Terrain => "terrain",
            Stage::Graph => "graph",
            Stage::Refine => "refine",
            Stage::Validate => "validate",
            Stage::Model => "model",
            Stage::Solve => "solve",
            Stage::Allocate => "allocate",
            Stage::Simulate => "simulate",
            Stage::Metric => "metric",
            Stage::Render => "render",
        }
    }

    pub fn parse(s: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|st| st.name() == s)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
#[error("stage {stage} failed: {cause}")]
pub struct PipelineError {
    pub stage: Stage,
    pub cause: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactBundle {
    pub dir: PathBuf,
    /// Files written, relative to `dir`, in stage order.
    pub files: Vec<String>,
    pub status: Option<MilpStatus>,
    pub objective: Option<f64>,
    pub protection: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub protection: f64,
    pub per_robot: Vec<(String, f64)>,
    /// Robots that never moved; they are left out of the mean.
    pub idle: Vec<String>,
}

/// Protection over the robots that moved.
pub fn metric_report(log: &ProtectionLog) -> Result<MetricReport, super::MetricError> {
    let idle: Vec<String> = log
        .robots()
        .into_iter()
        .filter(|r| log.entries.iter().filter(|e| e.robot == *r).map(|e| e.total).sum::<f64>() <= 0.0)
        .map(str::to_string)
        .collect();
    let moving = ProtectionLog { entries: log.entries.iter().filter(|e| !idle.contains(&e.robot)).cloned().collect() };
    Ok(MetricReport { protection: protection_metric(&moving)?, per_robot: moving.per_robot()?, idle })
}

struct Run<'a> {
    cfg: &'a PipelineConfig,
    dir: &'a Path,
    files: Vec<String>,
    dem: Option<ElevationGrid>,
    obstacles: Option<Mask>,
    visibility: Option<VisibilityMap>,
    cover: Option<Mask>,
    raw: Option<RawGraph>,
    instance: Option<Instance>,
    solution: Option<SolutionFile>,
    routes: Option<NamedRoutes>,
    protection: Option<ProtectionLog>,
    metric: Option<f64>,
}

fn fail(stage: Stage) -> impl Fn(String) -> PipelineError {
    move |cause| PipelineError { stage, cause }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), String> {
    let text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    fs::write(path, text + "\n").map_err(|e| format!("{}: {e}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn read_mask(path: &Path) -> Result<Mask, String> {
    Ok(read_grid(path).map_err(|e| format!("{}: {e}", path.display()))?.to_mask())
}

fn mask_to_f64(m: &Mask) -> Grid<f64> {
    Grid { geom: m.geom, data: m.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect() }
}

fn nearest_node(graph: &TopoGraph, p: [f64; 2]) -> Option<NodeId> {
    graph
        .nodes()
        .iter()
        .min_by(|a, b| {
            let da = (a.x - p[0]).hypot(a.y - p[1]);
            let db = (b.x - p[0]).hypot(b.y - p[1]);
            da.total_cmp(&db).then(a.id.cmp(&b.id))
        })
        .map(|n| n.id)
}

impl Run<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn save_json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<(), String> {
        write_json(&self.path(name), v)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn save_text(&mut self, name: &str, text: &str) -> Result<(), String> {
        fs::write(self.path(name), text).map_err(|e| format!("{name}: {e}"))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn save_grid(&mut self, name: &str, g: &Grid<f64>) -> Result<(), String> {
        write_f32(&self.path(name), g).map_err(|e| format!("{name}: {e}"))?;
        self.files.push(name.to_string());
        self.files.push(format!("{name}.json"));
        Ok(())
    }

    fn terrain(&mut self) -> Result<(), String> {
        let (dem, obstacles) = match &self.cfg.dem {
            DemSource::File { path, obstacles } => {
                let dem = read_grid(path).map_err(|e| format!("{}: {e}", path.display()))?;
                let obs = match obstacles {
                    Some(p) => read_mask(p)?,
                    None => Grid::filled(dem.geom, false),
                };
                (dem, obs)
            }
            &DemSource::Synthetic { width, height, resolution, seed } => {
                if width < 4 || height < 4 || !(resolution > 0.0) {
                    return Err("synthetic terrain needs at least 4x4 cells and positive resolution".into());
                }
                let dem = synthetic_meadow(width, height, resolution, seed);
                let obs = Grid::filled(dem.geom, false);
                (dem, obs)
            }
        };
        if !dem.same_shape(&obstacles) {
            return Err("obstacle raster does not match the elevation raster".into());
        }
        self.save_grid("dem.f32", &dem)?;
        self.save_grid("obstacles.f32", &mask_to_f64(&obstacles))?;
        self.dem = Some(dem);
        self.obstacles = Some(obstacles);
        Ok(())
    }

    fn need_terrain(&mut self) -> Result<(), String> {
        if self.dem.is_none() {
            self.dem = Some(read_grid(&self.path("dem.f32")).map_err(|e| format!("dem.f32: {e}"))?);
            self.obstacles = Some(read_mask(&self.path("obstacles.f32"))?);
        }
        Ok(())
    }

    fn graph(&mut self) -> Result<(), String> {
        self.need_terrain()?;
        let p = GraphGenParams { seed: self.cfg.seed, ..self.cfg.graphgen.clone() };
        self.cfg.observers.validate().map_err(|e| e.to_string())?;
        let g = generate_graph(self.dem.as_ref().unwrap(), self.obstacles.as_ref().unwrap(), &self.cfg.observers, &p)
            .map_err(|e| e.to_string())?;
        self.save_grid("visibility.f32", &g.visibility)?;
        self.save_grid("cover.f32", &mask_to_f64(&g.cover))?;
        self.save_json("raw_graph.json", &g.raw)?;
        self.visibility = Some(g.visibility);
        self.cover = Some(g.cover);
        self.raw = Some(g.raw);
        Ok(())
    }

    fn need_graph(&mut self) -> Result<(), String> {
        if self.raw.is_none() {
            self.raw = Some(read_json(&self.path("raw_graph.json"))?);
            self.visibility =
                Some(read_grid(&self.path("visibility.f32")).map_err(|e| format!("visibility.f32: {e}"))?);
            self.cover = Some(read_mask(&self.path("cover.f32"))?);
        }
        Ok(())
    }

    fn refine(&mut self) -> Result<(), String> {
        self.need_graph()?;
        let refined = refine_graph(self.raw.as_ref().unwrap(), &self.cfg.refine).map_err(|e| e.to_string())?;
        let sc = &self.cfg.scenario;
        let start = nearest_node(&refined.graph, sc.start).ok_or("refined graph has no nodes")?;
        let goal = nearest_node(&refined.graph, sc.goal).ok_or("refined graph has no nodes")?;
        let scenario = Scenario {
            n_robots: sc.n_robots,
            horizon: sc.horizon,
            starts: vec![LocCount { location: (start, start), count: sc.n_robots }],
            goals: vec![LocCount { location: (goal, goal), count: sc.goal_count }],
            edge_params: refined.edge_params,
            time_weight: sc.time_weight,
        };
        let inst = Instance { graph: refined.graph, scenario };
        self.save_json("instance.json", &inst)?;
        self.instance = Some(inst);
        Ok(())
    }

    fn need_instance(&mut self) -> Result<&Instance, String> {
        if self.instance.is_none() {
            self.instance = Some(read_json(&self.path("instance.json"))?);
        }
        Ok(self.instance.as_ref().unwrap())
    }

    fn validate(&mut self) -> Result<(), String> {
        let inst = self.need_instance()?;
        let v = validate(&inst.graph, &inst.scenario);
        if v.is_empty() {
            Ok(())
        } else {
            Err(v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; "))
        }
    }

    fn model(&mut self) -> Result<(), String> {
        let inst = self.need_instance()?;
        let m = build_milp(&inst.graph, &inst.scenario).map_err(|e| e.to_string())?;
        let lp = export_lp(&m);
        self.save_text("model.lp", &lp)
    }

    fn solve(&mut self) -> Result<(), String> {
        let inst = self.need_instance()?.clone();
        let m = build_milp(&inst.graph, &inst.scenario).map_err(|e| e.to_string())?;
        let r = solve_milp(&m, self.cfg.solver.budget());
        let file =
            SolutionFile { status: r.status, objective: r.objective, bound: r.bound, solution: r.incumbent.clone() };
        self.save_json("solution.json", &file)?;
        let stats = serde_json::json!({
            "nodes_explored": r.nodes_explored,
            "lp_iterations": r.lp_iterations,
            "wall_time_s": r.wall_time.as_secs_f64(),
        });
        self.save_json("solve_stats.json", &stats)?;
        if file.solution.is_none() {
            return Err(format!("no feasible plan ({:?})", r.status));
        }
        self.solution = Some(file);
        Ok(())
    }

    fn allocate(&mut self) -> Result<(), String> {
        if self.solution.is_none() {
            self.solution = Some(read_json(&self.path("solution.json"))?);
        }
        let p = self.solution.as_ref().unwrap().solution.as_ref().ok_or("solution file has no plan")?.p.clone();
        let inst = self.need_instance()?;
        let routes = allocate_routes(&inst.graph, &p, inst.scenario.n_robots).map_err(|e| e.to_string())?;
        let robots = (1..=routes.n_robots()).map(|i| format!("r{i:02}")).collect();
        let named = NamedRoutes { robots, routes };
        self.save_json("routes.json", &named)?;
        self.routes = Some(named);
        Ok(())
    }

    fn need_routes(&mut self) -> Result<(), String> {
        if self.routes.is_none() {
            self.routes = Some(read_json(&self.path("routes.json"))?);
        }
        Ok(())
    }

    fn simulate(&mut self) -> Result<(), String> {
        self.need_terrain()?;
        self.need_graph()?;
        self.need_routes()?;
        self.need_instance()?;
        let obstacles = self.obstacles.as_ref().unwrap();
        let costmap = CostMap {
            grid: Grid {
                geom: obstacles.geom,
                data: obstacles.data.iter().map(|&b| if b { 255 } else { 0 }).collect(),
            },
        };
        let sim = SimParams { seed: self.cfg.seed, ..self.cfg.sim.clone() };
        let named = self.routes.as_ref().unwrap();
        let log = simulate_team(
            &self.instance.as_ref().unwrap().graph,
            &named.routes,
            &named.robots,
            Some(&costmap),
            self.cover.as_ref(),
            &sim,
        )
        .map_err(|e| e.to_string())?;
        self.save_text("sim_log.jsonl", &log.to_jsonl())?;
        self.save_json("sim_events.json", &log.events)?;
        self.save_json("protection.json", &log.protection)?;
        self.protection = Some(log.protection);
        Ok(())
    }

    fn metric(&mut self) -> Result<(), String> {
        if self.protection.is_none() {
            self.protection = Some(read_json(&self.path("protection.json"))?);
        }
        let report = metric_report(self.protection.as_ref().unwrap()).map_err(|e| e.to_string())?;
        self.metric = Some(report.protection);
        self.save_json("metric.json", &report)
    }

    fn render(&mut self) -> Result<(), String> {
        self.need_graph()?;
        let style = RenderStyle::default();
        let inst = self.need_instance()?.clone();
        self.save_text("graph.svg", &graph_svg(&inst.graph, style))?;
        self.save_text("graph.dot", &graph_dot(&inst.graph))?;
        let vis = raster_svg(self.visibility.as_ref().unwrap(), style);
        self.save_text("visibility.svg", &vis)?;
        if self.routes.is_none() && self.path("routes.json").exists() {
            self.need_routes()?;
        }
        if let Some(r) = self.routes.clone() {
            self.save_text("plan.svg", &plan_svg(&inst.graph, &r.routes, style))?;
            self.save_text("plan.dot", &plan_dot(&inst.graph, &r.routes))?;
        }
        Ok(())
    }
}

/// Runs every stage into `dir`.
pub fn run_pipeline(cfg: &PipelineConfig, dir: &Path) -> Result<ArtifactBundle, PipelineError> {
    run_pipeline_from(cfg, dir, Stage::Terrain)
}

/// Runs the stages from `from` on, reading earlier outputs from `dir`.
/// Artifacts written before a failure stay on disk.
pub fn run_pipeline_from(cfg: &PipelineConfig, dir: &Path, from: Stage) -> Result<ArtifactBundle, PipelineError> {
    run_stages(cfg, dir, from, Stage::Render)
}

/// Runs the stages `from..=through`.
pub fn run_stages(
    cfg: &PipelineConfig,
    dir: &Path,
    from: Stage,
    through: Stage,
) -> Result<ArtifactBundle, PipelineError> {
    fs::create_dir_all(dir).map_err(|e| PipelineError { stage: from, cause: e.to_string() })?;
    let mut run = Run {
        cfg,
        dir,
        files: Vec::new(),
        dem: None,
        obstacles: None,
        visibility: None,
        cover: None,
        raw: None,
        instance: None,
        solution: None,
        routes: None,
        protection: None,
        metric: None,
    };
    if from == Stage::Terrain {
        write_json(&dir.join("config.json"), cfg).map_err(fail(Stage::Terrain))?;
        run.files.push("config.json".into());
    }
    for stage in Stage::ALL.into_iter().filter(|&s| s >= from && s <= through) {
        let skipped = cfg.skip_simulation && matches!(stage, Stage::Simulate | Stage::Metric);
        if skipped {
            continue;
        }
        let r = match stage {
            Stage::Terrain => run.terrain(),
            Stage::Graph => run.graph(),
            Stage::Refine => run.refine(),
            Stage::Validate => run.validate(),
            Stage::Model => run.model(),
            Stage::Solve => run.solve(),
            Stage::Allocate => run.allocate(),
            Stage::Simulate => run.simulate(),
            Stage::Metric => run.metric(),
            Stage::Render => run.render(),
        };
        r.map_err(fail(stage))?;
    }
    let bundle = ArtifactBundle {
        dir: dir.to_path_buf(),
        files: run.files.clone(),
        status: run.solution.as_ref().map(|s| s.status),
        objective: run.solution.as_ref().map(|s| s.objective),
        protection: run.metric,
    };
    write_json(&dir.join("bundle.json"), &bundle).map_err(fail(through))?;
    Ok(bundle)
}
