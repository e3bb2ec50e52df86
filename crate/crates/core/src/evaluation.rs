//! Episode runner, per-episode metrics and suite aggregation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{Agent, AgentConfig};
use crate::geometry::{distance_field, Grid, GridIndex, Point};
use crate::world::{Action, Episode, ObjectCategory, Scene, Simulator, TaskMode, Termination, WorldError, SCHEMA_VERSION};

/// How PPL is cut for partially completed episodes. Written into every
/// summary so downstream readers know which variant produced the numbers.
pub const PPL_DEFINITION: &str =
    "progress * chain(start..goal_k) / max(path_to_kth_found, chain), k = goals found; 0 when k = 0";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("metric undefined: shortest path length {0} <= 0")]
    MetricDomain(f64),
    #[error("episode {0}: goal {1} unreachable from the previous waypoint")]
    Unreachable(String, usize),
    #[error("no scene {scene} for episode {episode}")]
    MissingScene { scene: String, episode: String },
    #[error("invalid agent config: {0}")]
    InvalidConfig(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error(transparent)]
    World(#[from] WorldError),
}

/// Success weighted by inverse path length.
pub fn spl(success: bool, shortest: f64, path: f64) -> Result<f64, EvalError> {
    if shortest <= 0.0 || !shortest.is_finite() {
        return Err(EvalError::MetricDomain(shortest));
    }
    if !success {
        return Ok(0.0);
    }
    Ok(shortest / path.max(shortest))
}

/// Progress weighted by path length, cut at the last correct Found.
pub fn ppl(progress: f64, shortest_to_progress: f64, path_to_progress: f64) -> Result<f64, EvalError> {
    if progress <= 0.0 {
        return Ok(0.0);
    }
    if shortest_to_progress <= 0.0 || !shortest_to_progress.is_finite() {
        return Err(EvalError::MetricDomain(shortest_to_progress));
    }
    Ok(progress * shortest_to_progress / path_to_progress.max(shortest_to_progress))
}

/// Progress expected if each goal succeeded independently with `p1`.
pub fn expected_progress_independent(p1: f64, n: u32) -> f64 {
    p1.powi(n as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureClass {
    None,
    WrongFound,
    OutOfStepsGoalSeen,
    OutOfStepsGoalUnseen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalRecord {
    pub category: ObjectCategory,
    /// Step count right after the correct Found.
    pub found_step: Option<usize>,
    /// First step at which the category was on the agent's map.
    pub seen_step: Option<usize>,
    /// On the map before the preceding goal was found. Always false for the
    /// first goal.
    pub seen_before_prior: bool,
    /// Geodesic length from the previous goal (or the start).
    pub shortest_leg: f64,
    /// Agent path length from the previous correct Found (or the start).
    pub path_leg: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoundEvent {
    pub step: usize,
    pub x: f64,
    pub y: f64,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub schema_version: u32,
    pub episode_id: String,
    pub scene_id: String,
    pub episode_seed: u64,
    pub run: usize,
    pub mode: TaskMode,
    pub n_goals: usize,
    pub success: bool,
    pub progress: f64,
    pub spl: f64,
    pub ppl: f64,
    pub steps: usize,
    pub agent_path_length: f64,
    pub shortest_path_length: f64,
    pub collisions: usize,
    pub failure_class: FailureClass,
    pub goals: Vec<GoalRecord>,
    /// Explored area (m²) when the first goal was found.
    pub coverage_before_first_goal: Option<f64>,
    pub explored_area: f64,
    /// World-frame positions, start included.
    pub trajectory: Vec<[f64; 2]>,
    pub found_events: Vec<FoundEvent>,
    /// Run lengths over the scene grid (row-major), alternating
    /// unexplored/explored and starting with unexplored.
    pub explored_rle: Vec<u32>,
}

impl EpisodeResult {
    pub fn goals_found(&self) -> usize {
        self.goals.iter().filter(|g| g.found_step.is_some()).count()
    }
}

fn rle(mask: &Grid<bool>) -> Vec<u32> {
    let mut out = Vec::new();
    let mut cur = false;
    let mut run = 0u32;
    for &b in mask.as_slice() {
        if b == cur {
            run += 1;
        } else {
            out.push(run);
            cur = b;
            run = 1;
        }
    }
    out.push(run);
    out
}

/// Expands `explored_rle` back into a mask of `rows × cols`.
pub fn decode_rle(runs: &[u32], rows: usize, cols: usize) -> Option<Grid<bool>> {
    let mut data = Vec::with_capacity(rows * cols);
    for (i, &r) in runs.iter().enumerate() {
        data.extend(std::iter::repeat_n(i % 2 == 1, r as usize));
    }
    Grid::from_vec(rows, cols, data)
}

/// Geodesic legs start → goal₁ → … → goalₙ on the agent-radius navigable
/// mask. ObjectNav measures to the nearest success viewpoint.
pub fn shortest_legs(scene: &Scene, episode: &Episode) -> Result<Vec<f64>, EvalError> {
    let nav = scene.navigable_for(episode.task.agent_radius);
    let spec = &scene.spec;
    let mut legs = Vec::with_capacity(episode.goals.len());
    let mut prev = episode.start.position();
    for (k, &id) in episode.goals.iter().enumerate() {
        let goal = episode.object(id).position;
        let a = spec.world_to_grid(prev).map_err(WorldError::from)?;
        let field = distance_field(&nav, spec.cell_size, a);
        let leg_to = |p: Point| -> Result<f64, EvalError> {
            let b = spec.world_to_grid(p).map_err(WorldError::from)?;
            Ok(if a == b && nav[a] { 0.0 } else { field[b] })
        };
        let d = match episode.task.mode {
            TaskMode::Objectnav if !episode.viewpoints.is_empty() => {
                let mut best = f64::INFINITY;
                for &v in &episode.viewpoints {
                    let d = leg_to(v)?;
                    best = best.min(if d == 0.0 { prev.distance(v) } else { d });
                }
                best
            }
            _ => leg_to(goal)?,
        };
        if !d.is_finite() {
            return Err(EvalError::Unreachable(episode.id.clone(), k));
        }
        legs.push(d);
        prev = goal;
    }
    Ok(legs)
}

/// Runs one episode to termination.
pub fn run_episode(scene: &Scene, episode: &Episode, cfg: &AgentConfig, agent_seed: u64, run: usize) -> Result<EpisodeResult, EvalError> {
    cfg.validate().map_err(EvalError::InvalidConfig)?;
    let sim = Simulator::new(scene, episode)?;
    let legs = shortest_legs(scene, episode)?;
    let (mut state, mut obs) = sim.reset();
    let start = episode.start.position();
    let mut agent = Agent::new(*cfg, episode.task, agent_seed, scene, start);
    let mut goals: Vec<GoalRecord> = episode
        .goals
        .iter()
        .zip(&legs)
        .map(|(&id, &leg)| GoalRecord {
            category: episode.object(id).category,
            found_step: None,
            seen_step: None,
            seen_before_prior: false,
            shortest_leg: leg,
            path_leg: None,
        })
        .collect();
    let mut trajectory = vec![[start.x, start.y]];
    let mut found_events = Vec::new();
    let mut path = 0.0;
    let mut path_at_last_found = 0.0;
    let mut collisions = 0;
    let mut collided = false;
    let mut coverage_before_first_goal = None;
    let cell_area = agent.maps.spec().cell_area();

    let termination = loop {
        let action = agent.act(&obs, collided);
        for g in goals.iter_mut().filter(|g| g.seen_step.is_none()) {
            if agent.maps.semantic.contains_category(g.category) {
                g.seen_step = Some(state.steps);
            }
        }
        let (next, out) = sim.step(&state, action)?;
        let moved = state.pose.position().distance(next.pose.position());
        if moved > 0.0 {
            path += moved;
            trajectory.push([next.pose.x, next.pose.y]);
        }
        collided = out.collided;
        collisions += usize::from(out.collided);
        if matches!(action, Action::Found | Action::Stop) {
            let p = next.pose.position();
            found_events.push(FoundEvent {
                step: next.steps,
                x: p.x,
                y: p.y,
                correct: out.goal_consumed,
            });
        }
        if out.goal_consumed {
            let k = state.goal_index;
            goals[k].found_step = Some(next.steps);
            goals[k].path_leg = Some(path - path_at_last_found);
            path_at_last_found = path;
            if k == 0 {
                coverage_before_first_goal = Some(agent.maps.occupancy.explored_count() as f64 * cell_area);
            }
        }
        state = next;
        obs = out.observation;
        if let Some(t) = out.termination {
            break t;
        }
    };

    for k in 1..goals.len() {
        let prior = goals[k - 1].found_step;
        goals[k].seen_before_prior = matches!((goals[k].seen_step, prior), (Some(s), Some(f)) if s < f);
    }
    let n = goals.len();
    let found = goals.iter().filter(|g| g.found_step.is_some()).count();
    let success = matches!(termination, Termination::AllGoalsFound | Termination::Stopped { success: true });
    let progress = found as f64 / n as f64;
    let shortest_total: f64 = legs.iter().sum();
    let chain: f64 = legs[..found].iter().sum();
    let failure_class = match termination {
        Termination::AllGoalsFound | Termination::Stopped { success: true } => FailureClass::None,
        Termination::WrongFound | Termination::Stopped { success: false } => FailureClass::WrongFound,
        Termination::OutOfSteps => {
            let current = goals.get(state.goal_index);
            if current.is_some_and(|g| g.seen_step.is_some()) {
                FailureClass::OutOfStepsGoalSeen
            } else {
                FailureClass::OutOfStepsGoalUnseen
            }
        }
    };

    let spec = &scene.spec;
    let map_spec = *agent.maps.spec();
    let mut explored = Grid::filled(spec.rows, spec.cols, false);
    for (idx, _) in agent.maps.occupancy.explored_mask().iter().filter(|(_, &e)| e) {
        let w = map_spec.cell_center(idx).add(start);
        if let Ok(c) = spec.world_to_grid(w) {
            explored[c] = true;
        }
    }

    Ok(EpisodeResult {
        schema_version: SCHEMA_VERSION,
        episode_id: episode.id.clone(),
        scene_id: scene.id.clone(),
        episode_seed: episode.seed,
        run,
        mode: episode.task.mode,
        n_goals: n,
        success,
        progress,
        spl: spl(success, shortest_total, path)?,
        ppl: ppl(progress, chain, path_at_last_found)?,
        steps: state.steps,
        agent_path_length: path,
        shortest_path_length: shortest_total,
        collisions,
        failure_class,
        goals,
        coverage_before_first_goal,
        explored_area: agent.maps.occupancy.explored_count() as f64 * cell_area,
        trajectory,
        found_events,
        explored_rle: rle(&explored),
    })
}

/// Agent seed for one episode of one run.
pub fn agent_seed(run_seed: u64, episode_seed: u64) -> u64 {
    let mut z = run_seed ^ episode_seed.rotate_left(32) ^ 0x9E37_79B9_7F4A_7C15;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs every episode, in parallel on the current rayon pool, and returns
/// results sorted by episode id.
pub fn run_suite(scenes: &[Scene], episodes: &[Episode], cfg: &AgentConfig, run_seed: u64, run: usize) -> Result<Vec<EpisodeResult>, EvalError> {
    if episodes.is_empty() {
        return Err(EvalError::Empty("episode list"));
    }
    cfg.validate().map_err(EvalError::InvalidConfig)?;
    let mut results = episodes
        .par_iter()
        .map(|ep| {
            let scene = scenes.iter().find(|s| s.id == ep.scene_id).ok_or_else(|| EvalError::MissingScene {
                scene: ep.scene_id.clone(),
                episode: ep.id.clone(),
            })?;
            run_episode(scene, ep, cfg, agent_seed(run_seed, ep.seed), run)
        })
        .collect::<Result<Vec<_>, _>>()?;
    results.sort_by(|a, b| a.episode_id.cmp(&b.episode_id));
    Ok(results)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> MeanStd {
    if values.is_empty() {
        return MeanStd::default();
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    MeanStd { mean, std: var.sqrt() }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunMeans {
    pub episodes: usize,
    pub success: f64,
    pub progress: f64,
    pub spl: f64,
    pub ppl: f64,
}

pub fn run_means(results: &[EpisodeResult]) -> RunMeans {
    let n = results.len();
    if n == 0 {
        return RunMeans::default();
    }
    let avg = |f: &dyn Fn(&EpisodeResult) -> f64| results.iter().map(f).sum::<f64>() / n as f64;
    RunMeans {
        episodes: n,
        success: avg(&|r| f64::from(u8::from(r.success))),
        progress: avg(&|r| r.progress),
        spl: avg(&|r| r.spl),
        ppl: avg(&|r| r.ppl),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub runs: usize,
    pub success: MeanStd,
    pub progress: MeanStd,
    pub spl: MeanStd,
    pub ppl: MeanStd,
    pub per_run: Vec<RunMeans>,
    pub ppl_definition: String,
    pub std_kind: String,
}

/// Per-run means, then mean and population std across runs.
pub fn aggregate(runs: &[Vec<EpisodeResult>]) -> Result<MetricsSummary, EvalError> {
    if runs.is_empty() {
        return Err(EvalError::Empty("run list"));
    }
    let per_run: Vec<RunMeans> = runs.iter().map(|r| run_means(r)).collect();
    let col = |f: fn(&RunMeans) -> f64| mean_std(&per_run.iter().map(f).collect::<Vec<_>>());
    Ok(MetricsSummary {
        runs: runs.len(),
        success: col(|m| m.success),
        progress: col(|m| m.progress),
        spl: col(|m| m.spl),
        ppl: col(|m| m.ppl),
        per_run,
        ppl_definition: PPL_DEFINITION.to_string(),
        std_kind: "population".to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FailureCounts {
    pub success: usize,
    pub wrong_found: usize,
    pub out_of_steps_goal_seen: usize,
    pub out_of_steps_goal_unseen: usize,
}

impl FailureCounts {
    pub fn total(&self) -> usize {
        self.success + self.wrong_found + self.out_of_steps_goal_seen + self.out_of_steps_goal_unseen
    }
}

pub fn failure_counts(results: &[EpisodeResult]) -> FailureCounts {
    let mut c = FailureCounts::default();
    for r in results {
        match r.failure_class {
            FailureClass::None => c.success += 1,
            FailureClass::WrongFound => c.wrong_found += 1,
            FailureClass::OutOfStepsGoalSeen => c.out_of_steps_goal_seen += 1,
            FailureClass::OutOfStepsGoalUnseen => c.out_of_steps_goal_unseen += 1,
        }
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DiscoveryCell {
    /// Goals in this column.
    pub count: usize,
    pub reached: usize,
    pub accuracy: f64,
    /// Mean path length from the previous Found, over reached goals.
    pub avg_path_length: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryRow {
    /// 1-based goal position.
    pub k: usize,
    /// Episodes in which goal k was attempted (goal k−1 reached).
    pub n: usize,
    pub seen: DiscoveryCell,
    pub not_seen: DiscoveryCell,
    /// First goal only: seen but not reached, and never seen.
    pub first_seen_not_reached: Option<usize>,
    pub first_not_seen: Option<usize>,
    /// First goal only: mean explored area (m²) when it was reached.
    pub coverage_m2: Option<f64>,
}

fn cell_of(records: &[&GoalRecord]) -> DiscoveryCell {
    let count = records.len();
    let reached: Vec<f64> = records.iter().filter_map(|g| g.path_leg).collect();
    DiscoveryCell {
        count,
        reached: reached.len(),
        accuracy: if count == 0 { 0.0 } else { reached.len() as f64 / count as f64 },
        avg_path_length: (!reached.is_empty()).then(|| reached.iter().sum::<f64>() / reached.len() as f64),
    }
}

/// Goal reach statistics split by whether goal k was on the map before goal
/// k−1 was found.
pub fn goal_discovery_report(results: &[EpisodeResult]) -> Vec<DiscoveryRow> {
    let max_n = results.iter().map(|r| r.goals.len()).max().unwrap_or(0);
    let mut rows = Vec::with_capacity(max_n);
    for k in 0..max_n {
        let attempted: Vec<&EpisodeResult> = results
            .iter()
            .filter(|r| k < r.goals.len() && (k == 0 || r.goals[k - 1].found_step.is_some()))
            .collect();
        let (seen, not_seen): (Vec<&GoalRecord>, Vec<&GoalRecord>) =
            attempted.iter().map(|r| &r.goals[k]).partition(|g| g.seen_before_prior);
        let mut row = DiscoveryRow {
            k: k + 1,
            n: attempted.len(),
            seen: cell_of(&seen),
            not_seen: cell_of(&not_seen),
            first_seen_not_reached: None,
            first_not_seen: None,
            coverage_m2: None,
        };
        if k == 0 {
            let goals: Vec<&GoalRecord> = attempted.iter().map(|r| &r.goals[0]).collect();
            row.first_seen_not_reached = Some(goals.iter().filter(|g| g.seen_step.is_some() && g.found_step.is_none()).count());
            row.first_not_seen = Some(goals.iter().filter(|g| g.seen_step.is_none()).count());
            let cov: Vec<f64> = attempted.iter().filter_map(|r| r.coverage_before_first_goal).collect();
            row.coverage_m2 = (!cov.is_empty()).then(|| cov.iter().sum::<f64>() / cov.len() as f64);
        }
        rows.push(row);
    }
    rows
}

/// One JSON object per line, in the given order.
pub fn to_jsonl(results: &[EpisodeResult]) -> Result<String, serde_json::Error> {
    let mut out = String::new();
    for r in results {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn from_jsonl(text: &str) -> Result<Vec<EpisodeResult>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

/// CSV with one row per run plus a final `mean` and `std` row.
pub fn summary_csv(summary: &MetricsSummary) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["run", "episodes", "success", "progress", "spl", "ppl"])?;
    for (i, m) in summary.per_run.iter().enumerate() {
        w.write_record([
            i.to_string(),
            m.episodes.to_string(),
            format!("{:.6}", m.success),
            format!("{:.6}", m.progress),
            format!("{:.6}", m.spl),
            format!("{:.6}", m.ppl),
        ])?;
    }
    let eps = summary.per_run.first().map_or(0, |m| m.episodes).to_string();
    for (label, pick) in [("mean", true), ("std", false)] {
        let v = |ms: MeanStd| format!("{:.6}", if pick { ms.mean } else { ms.std });
        w.write_record([
            label.to_string(),
            eps.clone(),
            v(summary.success),
            v(summary.progress),
            v(summary.spl),
            v(summary.ppl),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Scene cells the agent had explored at termination.
pub fn explored_cells(result: &EpisodeResult, scene: &Scene) -> Vec<GridIndex> {
    decode_rle(&result.explored_rle, scene.spec.rows, scene.spec.cols)
        .map(|g| g.iter().filter(|(_, &b)| b).map(|(i, _)| i).collect())
        .unwrap_or_default()
}

/// World-frame trajectory as points.
pub fn trajectory_points(result: &EpisodeResult) -> Vec<Point> {
    result.trajectory.iter().map(|&[x, y]| Point::new(x, y)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spl_examples() {
        assert_eq!(spl(true, 10.0, 20.0).unwrap(), 0.5);
        assert_eq!(spl(false, 10.0, 20.0).unwrap(), 0.0);
        assert_eq!(spl(true, 10.0, 5.0).unwrap(), 1.0);
        assert!(matches!(spl(true, 0.0, 5.0), Err(EvalError::MetricDomain(_))));
    }

    #[test]
    fn ppl_examples() {
        assert!((ppl(2.0 / 3.0, 8.0, 16.0).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(ppl(0.0, 0.0, 0.0).unwrap(), 0.0);
        assert_eq!(ppl(1.0, 10.0, 20.0).unwrap(), spl(true, 10.0, 20.0).unwrap());
    }

    #[test]
    fn expected_progress_values() {
        assert!((expected_progress_independent(0.95, 3) - 0.857).abs() < 1e-3);
        assert!((expected_progress_independent(0.95, 5) - 0.774).abs() < 1e-3);
        assert_eq!(expected_progress_independent(1.0, 7), 1.0);
    }

    #[test]
    fn population_std() {
        let m = mean_std(&[0.8, 0.6]);
        assert!((m.mean - 0.7).abs() < 1e-12 && (m.std - 0.1).abs() < 1e-12);
        assert_eq!(mean_std(&[0.3]).std, 0.0);
    }

    #[test]
    fn rle_roundtrip() {
        let g = Grid::from_fn(3, 4, |i| (i.row + i.col) % 3 == 0);
        assert_eq!(decode_rle(&rle(&g), 3, 4).unwrap(), g);
        let all = Grid::filled(2, 2, true);
        assert_eq!(rle(&all), vec![0, 4]);
    }
}
