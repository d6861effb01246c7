//! One line per acceptance criterion. Runs as a plain binary so the report is
//! printed on every `cargo test`, and exits nonzero if any criterion fails.

use std::collections::BinaryHeap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use overwatch_core::dtg::{Node, NodeId, Scenario, TopoGraph};
use overwatch_core::fixtures::{self, RandomLimits};
use overwatch_core::graphgen::paths::{compute_one_path, DEFAULT_EPSILON};
use overwatch_core::graphgen::raster::{Cell, ElevationGrid, Grid, GridGeometry, Mask};
use overwatch_core::graphgen::{
    compute_visibility_map, generate_graph, synthetic_meadow, GraphGenParams, ObserverDistribution, SightParams,
};
use overwatch_core::harness::ablation::{solve_variant, variant_instance};
use overwatch_core::harness::{protection_metric, shortest_path_objective, ProtectionEntry, ProtectionLog, Variant};
use overwatch_core::local_planner::{
    dubins_step, mppi_plan, simulate_team, KinematicParams, MppiParams, RobotState, SimParams, StageContext,
    StageWeights,
};
use overwatch_core::mid_level::{allocate_routes, ArcPath, RobotRoutes};
use overwatch_core::milp::{build_gmip, build_milp, evaluate_plan_cost, Occupancy};
use overwatch_core::solver::{brute_force_solve, solve_milp, Budget, MilpStatus};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Criterion 8 on one solved plan: the routes re-aggregate to `p` and every
/// step follows the next-location sets.
fn routes_consistent(g: &TopoGraph, s: &Scenario, p: &Occupancy) -> Result<(), String> {
    let routes = allocate_routes(g, p, s.n_robots).map_err(|e| e.to_string())?;
    for (t, row) in p.iter().enumerate() {
        let mut counts = vec![0u32; g.num_locations()];
        for r in &routes.routes {
            counts[r[t]] += 1;
        }
        check(&counts == row, || format!("aggregate differs from p at t={}", t + 1))?;
    }
    for r in &routes.routes {
        for w in r.windows(2) {
            let next = g.next_edge_action_set(w[0]).map_err(|e| e.to_string())?;
            check(next.contains(&w[1]), || format!("route steps {:?} -> {:?}", g.location(w[0]), g.location(w[1])))?;
        }
    }
    Ok(())
}

fn c1_variable_counts() -> Outcome {
    let want = [460, 1160, 990, 1872];
    let t = Instant::now();
    let mut got = Vec::new();
    for (n_v, pairs, n_o, h) in fixtures::MODEL_SHAPES {
        let (g, s) = fixtures::shape_graph(n_v, pairs, n_o, h);
        got.push(build_milp(&g, &s).map_err(|e| e.to_string())?.variables.len());
    }
    let el = t.elapsed();
    check(got == want, || format!("variables {got:?}, want {want:?}"))?;
    check(el < Duration::from_secs(1), || format!("took {el:?}"))?;
    Ok(format!("{got:?} in {:.1} ms", el.as_secs_f64() * 1e3))
}

const BRUTE_LIMITS: RandomLimits = RandomLimits { max_nodes: 6, max_robots: 4, max_horizon: 6, max_overwatch: 4 };

fn c2_brute_force() -> Outcome {
    let t = Instant::now();
    let n = 100;
    for seed in 0..n {
        let (g, s) = fixtures::random_instance(10_000 + seed, BRUTE_LIMITS);
        let want = brute_force_solve(&g, &s).map_err(|e| format!("seed {seed}: {e}"))?.objective;
        let r = solve_milp(&build_milp(&g, &s).map_err(|e| e.to_string())?, Budget::seconds(60.0));
        check(r.status == MilpStatus::Optimal, || format!("seed {seed}: {:?}", r.status))?;
        let plan = r.incumbent.ok_or("optimal without plan")?;
        // integer data, so the plan's cost re-evaluated from counts is exact
        let exact = evaluate_plan_cost(&g, &s, &plan.p).map_err(|e| e.to_string())?;
        check(exact == want, || format!("seed {seed}: milp plan costs {exact}, brute force {want}"))?;
        check((r.objective - want).abs() < 1e-6, || format!("seed {seed}: reported {} vs {want}", r.objective))?;
    }
    let el = t.elapsed();
    check(el < Duration::from_secs(300), || format!("took {el:?}"))?;
    Ok(format!("{n} instances equal in {:.1} s", el.as_secs_f64()))
}

fn c3_gmip() -> Outcome {
    let lim = RandomLimits { max_nodes: 8, max_robots: 5, max_horizon: 6, max_overwatch: 4 };
    let n = 30;
    let mut worst = 0.0f64;
    for seed in 0..n {
        let (g, s) = fixtures::random_instance(20_000 + seed, lim);
        let a = solve_milp(&build_milp(&g, &s).map_err(|e| e.to_string())?, Budget::seconds(60.0));
        let b = solve_milp(&build_gmip(&g, &s).map_err(|e| e.to_string())?, Budget::seconds(120.0));
        check(a.status == MilpStatus::Optimal && b.status == MilpStatus::Optimal, || {
            format!("seed {seed}: {:?} / {:?}", a.status, b.status)
        })?;
        let d = (a.objective - b.objective).abs();
        worst = worst.max(d);
        check(d <= 1e-6, || format!("seed {seed}: {} vs {}", a.objective, b.objective))?;
    }
    Ok(format!("{n} instances, max |diff| {worst:.1e}"))
}

fn c4_ablation() -> Outcome {
    let lim = RandomLimits { max_nodes: 7, max_robots: 4, max_horizon: 6, max_overwatch: 4 };
    let n = 20;
    for seed in 0..n {
        let (g, s) = fixtures::random_instance(30_000 + seed, lim);
        let a = solve_variant(&g, &s, Variant::Baseline, Budget::seconds(60.0)).map_err(|e| e.to_string())?;
        let b = solve_variant(&g, &s, Variant::WithOverwatch, Budget::seconds(60.0)).map_err(|e| e.to_string())?;
        let (va, vb) = (a.objective.ok_or("no plan for (a)")?, b.objective.ok_or("no plan for (b)")?);
        let want = shortest_path_objective(&g, &s).ok_or("oracle does not apply")?;
        let (ga, sa) = variant_instance(&g, &s, Variant::Baseline);
        let exact = evaluate_plan_cost(&ga, &sa, a.plan.as_ref().unwrap()).map_err(|e| e.to_string())?;
        check(exact == want, || format!("seed {seed}: (a) plan costs {exact}, oracle {want}"))?;
        let (gb, sb) = variant_instance(&g, &s, Variant::WithOverwatch);
        let exact_b = evaluate_plan_cost(&gb, &sb, b.plan.as_ref().unwrap()).map_err(|e| e.to_string())?;
        check(exact_b <= exact, || format!("seed {seed}: overwatch raised the optimum {exact} -> {exact_b}"))?;
        check(vb <= va + 1e-9, || format!("seed {seed}: reported {va} -> {vb}"))?;
    }
    Ok(format!("{n} graphs: (a) = shortest path, (b) <= (a)"))
}

/// Time steps in which some opportunity has its watch node and its edge both
/// occupied.
fn watched_steps(g: &TopoGraph, p: &Occupancy) -> Vec<usize> {
    (0..p.len())
        .filter(|&t| {
            g.overwatch().iter().any(|o| {
                let w = g.node_loc(o.watcher).expect("watcher is a node");
                let e = g.loc_index(o.edge).expect("watched edge exists");
                p[t][w] > 0 && p[t][e] > 0
            })
        })
        .map(|t| t + 1)
        .collect()
}

fn c5_leapfrog() -> Outcome {
    let (g, s) = fixtures::leapfrog();
    let r = solve_milp(&build_milp(&g, &s).map_err(|e| e.to_string())?, Budget::seconds(60.0));
    check(r.status == MilpStatus::Optimal, || format!("{:?}", r.status))?;
    let p = r.incumbent.ok_or("no plan")?.p;
    let steps = watched_steps(&g, &p);
    check(steps.len() >= 2, || format!("watched steps {steps:?}"))?;
    Ok(format!("watched at t = {steps:?}"))
}

fn c6_desk_scale() -> Outcome {
    let (g, s) = fixtures::illustrative();
    let m = build_milp(&g, &s).map_err(|e| e.to_string())?;
    let t = Instant::now();
    let r = solve_milp(&m, Budget::seconds(60.0));
    let el = t.elapsed();
    check(m.variables.len() == 460, || format!("{} variables", m.variables.len()))?;
    check(r.status == MilpStatus::Optimal, || format!("{:?} after {el:?}", r.status))?;
    check(el < Duration::from_secs(60), || format!("took {el:?}"))?;
    Ok(format!("optimal {:.4} in {:.2} s, {} nodes", r.objective, el.as_secs_f64(), r.nodes_explored))
}

fn flat(w: usize, h: usize) -> ElevationGrid {
    Grid::filled(GridGeometry::new(w, h, 1.0), 0.0)
}

/// Plain Dijkstra over the 8-connected grid with the planner's step cost.
fn dijkstra_cost(obs: &Mask, vis: &Grid<f64>, a: Cell, b: Cell, lambda: f64) -> Option<f64> {
    let geom = obs.geom;
    let mut dist = vec![f64::INFINITY; geom.len()];
    let mut heap = BinaryHeap::new();
    dist[geom.index(a)] = 0.0;
    heap.push((std::cmp::Reverse(Ord64(0.0)), geom.index(a)));
    while let Some((std::cmp::Reverse(Ord64(d)), u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        let cu = geom.cell_of(u);
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                let (r, c) = (cu.0 as i64 + dr, cu.1 as i64 + dc);
                if (dr, dc) == (0, 0) || r < 0 || c < 0 || r >= geom.height as i64 || c >= geom.width as i64 {
                    continue;
                }
                let nb = (r as usize, c as usize);
                if *obs.get(nb) {
                    continue;
                }
                let len = if dr != 0 && dc != 0 { 2f64.sqrt() } else { 1.0 } * geom.resolution;
                let n = -(1.0 - vis.get(nb)).max(DEFAULT_EPSILON).ln();
                let nd = d + len * (1.0 + lambda * n);
                let v = geom.index(nb);
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push((std::cmp::Reverse(Ord64(nd)), v));
                }
            }
        }
    }
    let d = dist[geom.index(b)];
    d.is_finite().then_some(d)
}

#[derive(PartialEq)]
struct Ord64(f64);
impl Eq for Ord64 {}
impl Ord for Ord64 {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&o.0)
    }
}
impl PartialOrd for Ord64 {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}

fn c7_graphgen() -> Outcome {
    // flat terrain, point observer: visibility is the distance weight
    let d_max = 20.0;
    let (ox, oy) = (7.5, 12.5);
    let dem = flat(30, 25);
    let vis =
        compute_visibility_map(&dem, &ObserverDistribution::point(ox, oy, 1.7), 8, d_max, 1, SightParams::default())
            .map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for i in 0..dem.geom.len() {
        let p = dem.geom.center(dem.geom.cell_of(i));
        let want = (1.0 - (p[0] - ox).hypot(p[1] - oy) / d_max).max(0.0);
        worst = worst.max((vis.data[i] - want).abs());
    }
    check(worst <= 1e-6, || format!("flat map off by {worst}"))?;

    // tall wall at column 10: everything behind it is hidden
    let mut walled = flat(24, 9);
    for r in 0..9 {
        walled.set((r, 10), 1e6);
    }
    let wv = compute_visibility_map(
        &walled,
        &ObserverDistribution::point(2.5, 4.5, 1.7),
        8,
        100.0,
        1,
        SightParams::default(),
    )
    .map_err(|e| e.to_string())?;
    let lit = (0..9).flat_map(|r| (11..24).map(move |c| (r, c))).filter(|&c| *wv.get(c) != 0.0).count();
    check(lit == 0, || format!("{lit} shadow cells visible"))?;

    // A* against an independent Dijkstra
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut compared = 0;
    while compared < 50 {
        let g = GridGeometry::new(rng.random_range(5..30), rng.random_range(5..30), rng.random_range(0.5..2.0));
        let obs = Grid::from_fn(g, |_| rng.random::<f64>() < 0.25);
        let vmap = Grid::from_fn(g, |_| rng.random::<f64>());
        let free: Vec<Cell> = (0..g.len()).map(|i| g.cell_of(i)).filter(|&c| !*obs.get(c)).collect();
        if free.len() < 2 {
            continue;
        }
        let (a, b) = (free[rng.random_range(0..free.len())], free[rng.random_range(0..free.len())]);
        let lambda = rng.random_range(0.0..10.0);
        let x = compute_one_path(&obs, &vmap, a, b, lambda, DEFAULT_EPSILON).ok().map(|p| p.cost);
        let y = dijkstra_cost(&obs, &vmap, a, b, lambda);
        match (x, y) {
            (Some(x), Some(y)) => {
                check((x - y).abs() <= 1e-9 * y.max(1.0), || format!("A* {x} vs Dijkstra {y}"))?;
                compared += 1;
            }
            (None, None) => {}
            (x, y) => return Err(format!("reachability disagrees: {x:?} vs {y:?}")),
        }
    }

    // reconnection and determinism on generated graphs
    let mut graphs = 0;
    for seed in 0..6 {
        let dem = synthetic_meadow(48, 40, 1.0, seed);
        let obstacles = Grid::filled(dem.geom, false);
        let obs = ObserverDistribution::gaussian([24.0, 20.0], [[4.0, 0.0], [0.0, 4.0]], 1.7);
        let p = GraphGenParams {
            samples: 6,
            nu: 0.35,
            xi_min: 6,
            xi_max: 120,
            d_max: 40.0,
            ow_d_max: 30.0,
            seed,
            ..GraphGenParams::default()
        };
        let Ok(a) = generate_graph(&dem, &obstacles, &obs, &p) else { continue };
        let b = generate_graph(&dem, &obstacles, &obs, &p).map_err(|e| e.to_string())?;
        check(a == b, || format!("seed {seed}: rerun differs"))?;
        let t = &a.raw.paths;
        for v in (0..a.raw.nodes.len()).filter(|v| !t.disconnected.contains(v)) {
            check(t.in_degree(v) > 0 && t.out_degree(v) > 0, || format!("seed {seed}: node {v} is a source or sink"))?;
        }
        graphs += 1;
    }
    check(graphs >= 3, || format!("only {graphs} scenes produced a graph"))?;
    Ok(format!("flat max err {worst:.1e}, shadow dark, {compared} A* maps, {graphs} graphs reconnected"))
}

fn c8_allocation() -> Outcome {
    let mut solved = 0;
    for seed in 0..40 {
        let (g, s) = fixtures::random_instance(40_000 + seed, BRUTE_LIMITS);
        let r = solve_milp(&build_milp(&g, &s).map_err(|e| e.to_string())?, Budget::seconds(60.0));
        let p = r.incumbent.ok_or_else(|| format!("seed {seed}: no plan"))?.p;
        routes_consistent(&g, &s, &p).map_err(|e| format!("seed {seed}: {e}"))?;
        solved += 1;
    }
    for (name, (g, s)) in [
        ("illustrative", fixtures::illustrative()),
        ("bounding", fixtures::bounding()),
        ("leapfrog", fixtures::leapfrog()),
    ] {
        let r = solve_milp(&build_milp(&g, &s).map_err(|e| e.to_string())?, Budget::seconds(60.0));
        let p = r.incumbent.ok_or_else(|| format!("{name}: no plan"))?.p;
        routes_consistent(&g, &s, &p).map_err(|e| format!("{name}: {e}"))?;
        solved += 1;
    }
    Ok(format!("{solved} solved plans aggregate exactly"))
}

fn c9_local_planner() -> Outcome {
    let k = KinematicParams::default();
    let dw = k.a_max * k.dt / k.wheel_radius;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut x = RobotState::at([0.0, 0.0], 0.0);
    let steps = 1_000_000;
    for i in 0..steps {
        let u = [rng.random_range(-5.0..5.0), rng.random_range(-10.0..10.0)];
        let y = dubins_step(&x, u, &k);
        for j in 0..2 {
            check((y.w[j] - x.w[j]).abs() <= dw + 1e-9, || format!("step {i}: wheel jump"))?;
            check(y.w[j] >= k.v_min / k.wheel_radius - 1e-9 && y.w[j] <= k.v_max / k.wheel_radius + 1e-9, || {
                format!("step {i}: wheel speed {}", y.w[j])
            })?;
        }
        check(y.theta > -std::f64::consts::PI && y.theta <= std::f64::consts::PI, || format!("step {i}: heading"))?;
        x = if i % 5000 == 0 { RobotState::at([0.0, 0.0], 0.0) } else { y };
    }

    let goal = [8.0, 3.0];
    let mut ctx = StageContext::simple([goal[0], goal[1], 0.0], ArcPath::new(vec![[0.0, 0.0], goal]));
    ctx.weights = StageWeights::default();
    let p = MppiParams { samples: 128, horizon: 20, ..MppiParams::default() };
    let mut x = RobotState::at([0.0, 0.0], 0.0);
    let mut nominal = vec![[0.0, 0.0]; p.horizon];
    let mut replans = None;
    for i in 0..200 {
        nominal = mppi_plan(&x, &ctx, &k, &nominal, &p, 500 + i as u64);
        x = dubins_step(&x, nominal[0], &k);
        nominal.rotate_left(1);
        let n = nominal.len();
        nominal[n - 1] = nominal[n - 2];
        if (goal[0] - x.p[0]).hypot(goal[1] - x.p[1]) < ctx.pointing_radius {
            replans = Some(i + 1);
            break;
        }
    }
    let replans = replans.ok_or_else(|| format!("not at goal after 200 replans, at {:?}", x.p))?;

    let nodes = vec![Node { id: NodeId(1), x: 0.0, y: 0.0 }, Node { id: NodeId(2), x: 30.0, y: 0.0 }];
    let g = TopoGraph::new(nodes, vec![(NodeId(1), NodeId(2)), (NodeId(2), NodeId(1))], Default::default(), vec![])
        .map_err(|e| e.to_string())?;
    let l = |a, b| g.loc_index((NodeId(a), NodeId(b))).unwrap();
    let routes = RobotRoutes { routes: vec![vec![l(1, 1), l(1, 2), l(2, 2)]; 2] };
    let sp = SimParams {
        mppi: MppiParams { samples: 64, horizon: 20, ..MppiParams::default() },
        seed: 3,
        ..SimParams::default()
    };
    let log = simulate_team(&g, &routes, &["r1".into(), "r2".into()], None, None, &sp).map_err(|e| e.to_string())?;
    check(log.timeouts() == 0, || "formation run timed out".into())?;
    let d = log.min_coalition_distance().ok_or("robots never shared an edge")?;
    check(d >= sp.collision_radius, || format!("closest approach {d} < {}", sp.collision_radius))?;
    Ok(format!("{steps} clamped steps, goal after {replans} replans, min spacing {d:.3} >= {}", sp.collision_radius))
}

fn entry(robot: &str, total: f64, d_o: f64, d_f: f64, d_c: f64) -> ProtectionEntry {
    ProtectionEntry { robot: robot.into(), edge: (NodeId(1), NodeId(2)), d_o, d_f, d_c, total }
}

fn c10_metric() -> Outcome {
    let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
    let cover = protection_metric(&ProtectionLog { entries: vec![entry("a", 10.0, 0.0, 0.0, 10.0)] })
        .map_err(|e| e.to_string())?;
    let both = protection_metric(&ProtectionLog { entries: vec![entry("a", 10.0, 10.0, 0.0, 10.0)] })
        .map_err(|e| e.to_string())?;
    let mean = protection_metric(&ProtectionLog {
        entries: vec![entry("a", 4.0, 0.0, 0.0, 4.0), entry("b", 4.0, 0.0, 0.0, 2.0)],
    })
    .map_err(|e| e.to_string())?;
    check(close(cover, 1.0) && close(both, 2.0) && close(mean, 0.75), || format!("{cover} / {both} / {mean}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 2000;
    for i in 0..n {
        let entries: Vec<ProtectionEntry> = (0..rng.random_range(1..12))
            .map(|j| {
                let t = rng.random_range(0.01..50.0);
                let mut f = || t * rng.random_range(0.0..=1.0);
                entry(&format!("r{}", j % 4), t, f(), f(), f())
            })
            .collect();
        let v = protection_metric(&ProtectionLog { entries }).map_err(|e| e.to_string())?;
        check((0.0..=3.0).contains(&v), || format!("log {i}: metric {v}"))?;
    }
    Ok(format!("1.0 / 2.0 / 0.75, {n} random logs in [0, 3]"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("1 variable counts", c1_variable_counts),
        ("2 milp = brute force", c2_brute_force),
        ("3 milp = gmip (1e-6)", c3_gmip),
        ("4 ablation oracle", c4_ablation),
        ("5 bounding overwatch", c5_leapfrog),
        ("6 desk-scale solve", c6_desk_scale),
        ("7 graph generation", c7_graphgen),
        ("8 allocation", c8_allocation),
        ("9 local planner", c9_local_planner),
        ("10 protection metric", c10_metric),
    ];
    let timed = |f: fn() -> Outcome| {
        let t = Instant::now();
        (f(), t.elapsed())
    };
    // the timing criterion runs alone; the rest are independent and run side by side
    let solo = |name: &str| name.starts_with("6 ");
    let mut results: Vec<Option<(Outcome, Duration)>> =
        criteria.iter().map(|&(name, f)| solo(name).then(|| timed(f))).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = criteria
            .iter()
            .enumerate()
            .filter(|(_, (name, _))| !solo(name))
            .map(|(i, &(_, f))| (i, s.spawn(move || timed(f))))
            .collect();
        for (i, h) in handles {
            results[i] = Some(h.join().unwrap_or_else(|_| (Err("panicked".into()), Duration::ZERO)));
        }
    });
    let mut failed = 0;
    for ((name, _), (r, el)) in criteria.iter().zip(results.into_iter().flatten()) {
        match r {
            Ok(detail) => println!("PASS  {name:<24} {detail} [{:.1}s]", el.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name:<24} {why} [{:.1}s]", el.as_secs_f64());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
