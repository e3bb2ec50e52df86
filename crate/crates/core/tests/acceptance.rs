//! End-to-end acceptance checks. Runs without the libtest harness so the
//! per-criterion lines always reach stdout; exits non-zero on any failure.

mod common;

use std::time::{Duration, Instant};

use mopa::agent::AgentConfig;
use mopa::evaluation::*;
use mopa::exploration::Strategy;
use mopa::geometry::{distance_field, geodesic_distance, Grid, GridIndex, GridSpec, Point, Pose};
use mopa::navigation::{arrival_at, fmm_arrival, plan_bfs, plan_fmm, Backend};
use mopa::perception::{knn_color, ColorPrototypeSet, PerceptionMode};
use mopa::world::*;
use mopa_fixtures::{load_knn_cases, oracle_dijkstra};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RUNS: usize = 5;
const SUITE: u64 = 200;
const RUN_SEED: u64 = 7;

struct Report {
    failed: usize,
}

impl Report {
    fn check(&mut self, n: usize, ok: bool, detail: String, elapsed: Duration) {
        let verdict = if ok { "PASS" } else { "FAIL" };
        println!("criterion {n:>2}: {verdict}  {detail}  ({:.1} s)", elapsed.as_secs_f64());
        self.failed += usize::from(!ok);
    }
}

fn suite(task: TaskConfig, count: u64) -> (Vec<Scene>, Vec<Episode>) {
    let scenes: Vec<Scene> = (0..count).map(common::scene).collect();
    let episodes = scenes
        .iter()
        .enumerate()
        .map(|(s, scene)| generate_episode(scene, task, Split::Test, 1000 + s as u64).unwrap())
        .collect();
    (scenes, episodes)
}

fn config(backend: Backend, strategy: Strategy) -> AgentConfig {
    let mut cfg = AgentConfig::default();
    cfg.perception = PerceptionMode::Oracle;
    cfg.navigation.backend = backend;
    cfg.exploration.strategy = strategy;
    cfg
}

fn runs(scenes: &[Scene], episodes: &[Episode], cfg: &AgentConfig) -> Vec<Vec<EpisodeResult>> {
    (0..RUNS)
        .map(|r| run_suite(scenes, episodes, cfg, RUN_SEED + r as u64, r).unwrap())
        .collect()
}

fn per_run(results: &[Vec<EpisodeResult>], f: impl Fn(&RunMeans) -> f64) -> Vec<f64> {
    results.iter().map(|r| f(&run_means(r))).collect()
}

fn fmt(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join("/")
}

fn planner_optimality(report: &mut Report) {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 20;
    let spec = GridSpec::new(0.2, n, n, Point::new(0.0, 0.0)).unwrap();
    let mut mismatches = 0;
    let mut reachable = 0;
    for _ in 0..1000 {
        let density = rng.random_range(0.0..0.4);
        let mut mask = Grid::from_fn(n, n, |_| !rng.random_bool(density));
        let a = GridIndex::new(rng.random_range(0..n), rng.random_range(0..n));
        let b = GridIndex::new(rng.random_range(0..n), rng.random_range(0..n));
        mask[a] = true;
        mask[b] = true;
        let rows: Vec<Vec<bool>> = (0..n).map(|r| (0..n).map(|c| mask[GridIndex::new(r, c)]).collect()).collect();
        let oracle = oracle_dijkstra(&rows, (a.row, a.col), (b.row, b.col), 0.2).map(|o| o.hops);
        let bfs = plan_bfs(&mask, &spec, a, b).map(|p| p.hops());
        mismatches += usize::from(oracle != bfs);
        reachable += usize::from(oracle.is_some());
    }
    let el = t.elapsed();
    report.check(
        1,
        mismatches == 0 && el < Duration::from_secs(10),
        format!("BFS vs oracle hops: {mismatches} mismatches over 1000 masks ({reachable} reachable)"),
        el,
    );
}

fn fmm_fidelity(report: &mut Report) {
    let t = Instant::now();
    let n = 100;
    let mask = Grid::filled(n, n, true);
    let spec = GridSpec::new(0.2, n, n, Point::new(0.0, 0.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst, mut non_monotone, mut failed) = (0.0f64, 0, 0);
    for _ in 0..100 {
        let a = GridIndex::new(rng.random_range(0..n), rng.random_range(0..n));
        let mut b = a;
        while b == a {
            b = GridIndex::new(rng.random_range(0..n), rng.random_range(0..n));
        }
        let Some(plan) = plan_fmm(&mask, &spec, a, b) else {
            failed += 1;
            continue;
        };
        let e = spec.cell_center(a).distance(spec.cell_center(b));
        worst = worst.max((plan.length - e).abs() / e);
        let field = fmm_arrival(&mask, spec.cell_size, b);
        let vals: Vec<f64> = plan
            .points
            .iter()
            .map(|&p| {
                let (u, v) = spec.to_grid_units(p);
                arrival_at(&field, u, v)
            })
            .collect();
        // The last point is the snap onto the goal center.
        if !vals[..vals.len() - 1].windows(2).all(|w| w[1] < w[0]) {
            non_monotone += 1;
        }
    }
    report.check(
        2,
        failed == 0 && worst <= 0.05 && non_monotone == 0,
        format!("worst length error {:.2}%, {non_monotone} non-monotone, {failed} unplanned", 100.0 * worst),
        t.elapsed(),
    );
}

fn mixed_suite() -> Vec<EpisodeResult> {
    let groups: [(TaskConfig, Backend, PerceptionMode); 5] = [
        (TaskConfig::multion(1), Backend::SpfOracle, PerceptionMode::Oracle),
        (TaskConfig::multion(2), Backend::Bfs, PerceptionMode::Oracle),
        (TaskConfig::multion(3), Backend::Fmm, PerceptionMode::Oracle),
        (TaskConfig::multion(5), Backend::SpfOracle, PerceptionMode::Natural),
        (TaskConfig::objectnav(), Backend::SpfOracle, PerceptionMode::Cylinder),
    ];
    let mut all = Vec::new();
    for (g, (task, backend, perception)) in groups.into_iter().enumerate() {
        let scenes: Vec<Scene> = (0..100).map(|s| common::scene(5000 + 100 * g as u64 + s)).collect();
        let episodes: Vec<Episode> = scenes
            .iter()
            .enumerate()
            .map(|(i, sc)| generate_episode(sc, task, Split::ALL[i % 3], 7000 + i as u64).unwrap())
            .collect();
        let mut cfg = config(backend, Strategy::Uniform);
        cfg.perception = perception;
        all.extend(run_suite(&scenes, &episodes, &cfg, 3, 0).unwrap());
    }
    all
}

fn metric_bounds(report: &mut Report, results: &[EpisodeResult], elapsed: Duration) {
    let violations = results
        .iter()
        .filter(|r| {
            !(r.spl >= 0.0
                && r.spl <= f64::from(u8::from(r.success)) + 1e-12
                && r.ppl >= 0.0
                && r.ppl <= r.progress + 1e-12
                && (!r.success || r.progress == 1.0))
        })
        .count();
    report.check(
        3,
        violations == 0 && results.len() == 500,
        format!("{violations} violations over {} episodes", results.len()),
        elapsed,
    );
}

fn partition(report: &mut Report, suites: &[&[EpisodeResult]]) {
    let t = Instant::now();
    let mut bad = 0;
    let mut total = 0;
    for s in suites {
        let c = failure_counts(s);
        total += s.len();
        bad += usize::from(c.total() != s.len());
    }
    report.check(12, bad == 0, format!("{bad} suites with unbalanced counts, {total} episodes"), t.elapsed());
}

fn wrong_found(report: &mut Report) {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let scenes: Vec<Scene> = (0..20).map(common::scene).collect();
    let mut violations = 0;
    let mut cases = 0;
    while cases < 10_000 {
        let scene = &scenes[rng.random_range(0..scenes.len())];
        let n = rng.random_range(1..=5);
        let ep = generate_episode(scene, TaskConfig::multion(n), Split::Test, rng.random()).unwrap();
        let sim = Simulator::new(scene, &ep).unwrap();
        let (mut state, _) = sim.reset();
        state.goal_index = rng.random_range(0..n);
        state.steps = rng.random_range(0..ep.task.max_steps - 1);
        let free: Vec<GridIndex> = scene.navigable.iter().filter(|(_, &f)| f).map(|(i, _)| i).collect();
        for _ in 0..20 {
            let c = scene.spec.cell_center(free[rng.random_range(0..free.len())]);
            let goal = ep.goal(state.goal_index).unwrap().position;
            if c.distance(goal) <= ep.task.success_radius {
                continue;
            }
            let probe = AgentState {
                pose: Pose::new(c.x, c.y, rng.random_range(0.0..std::f64::consts::TAU)),
                ..state
            };
            let (next, out) = sim.step(&probe, Action::Found).unwrap();
            let ok = out.episode_over
                && next.termination == Some(Termination::WrongFound)
                && next.goal_index == probe.goal_index
                && !out.goal_consumed;
            violations += usize::from(!ok);
            cases += 1;
            break;
        }
    }
    report.check(8, violations == 0, format!("{violations} violations over {cases} cases"), t.elapsed());
}

fn generator_validity(report: &mut Report) {
    let t = Instant::now();
    let mut total = 0;
    let mut bad = 0;
    for s in 0..40u64 {
        let scene = common::scene(9000 + s);
        for split in Split::ALL {
            for task in [1, 2, 3, 4, 5].map(TaskConfig::multion).into_iter().chain([TaskConfig::objectnav()]) {
                let ep = generate_episode(&scene, task, split, 31 * s + split.min_separation().to_bits() % 97).unwrap();
                total += 1;
                let n = ep.goals.len();
                let mut ok = n == task.n_goals && ep.distractors.len() == NUM_CATEGORIES - n && ep.objects.len() == NUM_CATEGORIES;
                let nav = scene.navigable_for(ep.task.agent_radius);
                let start = ep.start.position();
                for &g in &ep.goals {
                    ok &= geodesic_distance(&nav, &scene.spec, start, ep.object(g).position).unwrap().is_some();
                }
                let points: Vec<GridIndex> = std::iter::once(start)
                    .chain(ep.objects.iter().map(|o| o.position))
                    .map(|p| scene.spec.world_to_grid(p).unwrap())
                    .collect();
                for (i, &a) in points.iter().enumerate() {
                    let field = distance_field(&nav, scene.spec.cell_size, a);
                    ok &= points[i + 1..].iter().all(|&b| field[b] >= split.min_separation() - 1e-9);
                }
                bad += usize::from(!ok);
            }
        }
    }
    report.check(9, bad == 0, format!("{bad} invalid of {total} episodes"), t.elapsed());
}

fn determinism(report: &mut Report) {
    let t = Instant::now();
    let (scenes, episodes) = suite(TaskConfig::multion(3), 50);
    let mut cfg = config(Backend::Fmm, Strategy::Uniform);
    cfg.perception = PerceptionMode::Natural;
    let a = to_jsonl(&run_suite(&scenes, &episodes, &cfg, 99, 0).unwrap()).unwrap();
    let b = to_jsonl(&run_suite(&scenes, &episodes, &cfg, 99, 0).unwrap()).unwrap();
    report.check(
        10,
        a.as_bytes() == b.as_bytes(),
        format!("{} bytes, {} lines, identical: {}", a.len(), a.lines().count(), a == b),
        t.elapsed(),
    );
}

fn knn_fixture(report: &mut Report) {
    let t = Instant::now();
    let cases = load_knn_cases();
    let mut wrong = Vec::new();
    for c in &cases {
        let samples = c
            .prototypes
            .iter()
            .map(|(l, r, g, b)| (l.parse::<ObjectCategory>().unwrap(), [*r, *g, *b]))
            .collect();
        let protos = ColorPrototypeSet::new(samples, c.k).unwrap();
        let want = c.expected.as_ref().map(|l| l.parse::<ObjectCategory>().unwrap());
        if knn_color(c.sample, &protos, c.k, c.accept_fraction) != want {
            wrong.push(c.id.clone());
        }
    }
    let boundaries = cases.iter().any(|c| c.id == "eight_of_ten_accept") && cases.iter().any(|c| c.id == "seven_of_ten_reject");
    report.check(
        11,
        wrong.is_empty() && cases.len() == 30 && boundaries,
        format!("{} of {} cases correct {wrong:?}", cases.len() - wrong.len(), cases.len()),
        t.elapsed(),
    );
}

fn main() {
    let mut report = Report { failed: 0 };
    println!("acceptance: {RUNS} runs, run seeds {RUN_SEED}..{}", RUN_SEED + RUNS as u64 - 1);

    planner_optimality(&mut report);
    fmm_fidelity(&mut report);

    let t = Instant::now();
    let mixed = mixed_suite();
    metric_bounds(&mut report, &mixed, t.elapsed());

    let t = Instant::now();
    let (scenes3, eps3) = suite(TaskConfig::multion(3), SUITE);
    let uniform = runs(&scenes3, &eps3, &config(Backend::SpfOracle, Strategy::Uniform));
    let no_failsafe = runs(&scenes3, &eps3, &config(Backend::SpfOracle, Strategy::UniformNoFailsafe));
    let pu = per_run(&uniform, |m| m.progress);
    let pn = per_run(&no_failsafe, |m| m.progress);
    let gaps: Vec<f64> = pu.iter().zip(&pn).map(|(a, b)| a - b).collect();
    let g = mean_std(&gaps);
    let (mu, mn) = (mean_std(&pu).mean, mean_std(&pn).mean);
    let el = t.elapsed();
    report.check(
        4,
        mu >= mn && g.mean > 0.0 && g.mean > 2.0 * g.std && el < Duration::from_secs(300),
        format!(
            "Progress uniform {mu:.3} [{}] vs no fail-safe {mn:.3} [{}], gap {:.3} ± {:.3}, {SUITE} episodes",
            fmt(&pu),
            fmt(&pn),
            g.mean,
            g.std
        ),
        el,
    );

    let t = Instant::now();
    let bfs = runs(&scenes3, &eps3, &config(Backend::Bfs, Strategy::Uniform));
    let fmm = runs(&scenes3, &eps3, &config(Backend::Fmm, Strategy::Uniform));
    let su = per_run(&uniform, |m| m.success);
    let sb = per_run(&bfs, |m| m.success);
    let sf = per_run(&fmm, |m| m.success);
    let (ms, mb, mf) = (mean_std(&su).mean, mean_std(&sb).mean, mean_std(&sf).mean);
    report.check(
        5,
        ms >= mb && ms >= mf,
        format!("Success SPF {ms:.3} [{}], BFS {mb:.3} [{}], FMM {mf:.3} [{}]", fmt(&su), fmt(&sb), fmt(&sf)),
        t.elapsed(),
    );

    let t = Instant::now();
    let spf = config(Backend::SpfOracle, Strategy::Uniform);
    let (scenes1, eps1) = suite(TaskConfig::multion(1), SUITE);
    let (scenes5, eps5) = suite(TaskConfig::multion(5), SUITE);
    let one = runs(&scenes1, &eps1, &spf);
    let five = runs(&scenes5, &eps5, &spf);
    let p1 = per_run(&one, |m| m.progress);
    let p5 = per_run(&five, |m| m.progress);
    let monotone = (0..RUNS).all(|r| p1[r] >= pu[r] && pu[r] >= p5[r]);
    report.check(
        6,
        monotone,
        format!("Progress 1ON [{}] ≥ 3ON [{}] ≥ 5ON [{}]", fmt(&p1), fmt(&pu), fmt(&p5)),
        t.elapsed(),
    );

    let t = Instant::now();
    let e3 = expected_progress_independent(0.95, 3);
    let e5 = expected_progress_independent(0.95, 5);
    report.check(
        7,
        (e3 - 0.857).abs() <= 0.001 && (e5 - 0.774).abs() <= 0.001,
        format!("0.95^3 = {e3:.4}, 0.95^5 = {e5:.4}"),
        t.elapsed(),
    );

    wrong_found(&mut report);
    generator_validity(&mut report);
    determinism(&mut report);
    knn_fixture(&mut report);

    let mut all: Vec<&[EpisodeResult]> = vec![&mixed];
    for set in [&uniform, &no_failsafe, &bfs, &fmm, &one, &five] {
        all.extend(set.iter().map(Vec::as_slice));
    }
    partition(&mut report, &all);

    println!("acceptance: {} of 12 criteria failed", report.failed);
    if report.failed > 0 {
        std::process::exit(1);
    }
}
