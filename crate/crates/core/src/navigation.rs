//! Path planners over grid masks and the low-level action controller.
//!
//! Masks are `true` on traversable cells. Every planner returns the cell
//! sequence from the start cell to the goal cell together with the metric
//! path it intends the agent to follow.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::geometry::{
    distance_field, nearest_free_cell, passable_neighbors, Grid, GridIndex, GridSpec, Point, Pose, NEIGHBORS8,
};
use crate::world::{Action, Scene};

/// A blocked goal is replaced by the nearest free cell within this many
/// cells.
pub const GOAL_SNAP_CELLS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    SpfOracle,
    Bfs,
    Fmm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathPlan {
    /// Start cell first, goal cell last; consecutive cells are 8-adjacent.
    pub cells: Vec<GridIndex>,
    /// Metric path in the coordinates of the mask's grid spec.
    pub points: Vec<Point>,
    pub length: f64,
}

impl PathPlan {
    pub fn hops(&self) -> usize {
        self.cells.len().saturating_sub(1)
    }

    fn from_cells(spec: &GridSpec, cells: Vec<GridIndex>) -> Self {
        let points: Vec<Point> = cells.iter().map(|&c| spec.cell_center(c)).collect();
        let length = polyline_length(&points);
        Self { cells, points, length }
    }
}

pub fn polyline_length(points: &[Point]) -> f64 {
    points.windows(2).map(|w| w[0].distance(w[1])).sum()
}

/// The goal cell itself when free, else the nearest free cell nearby.
pub fn resolve_goal(mask: &Grid<bool>, to: GridIndex) -> Option<GridIndex> {
    nearest_free_cell(mask, to, GOAL_SNAP_CELLS)
}

/// Minimum-hop 8-connected path (no corner cutting).
pub fn plan_bfs(mask: &Grid<bool>, spec: &GridSpec, from: GridIndex, to: GridIndex) -> Option<PathPlan> {
    if !mask.get(from).copied().unwrap_or(false) {
        return None;
    }
    let goal = resolve_goal(mask, to)?;
    let mut parent: Vec<Option<usize>> = vec![None; mask.len()];
    let start = mask.flat_index(from);
    parent[start] = Some(start);
    let mut queue = VecDeque::from([from]);
    while let Some(cur) = queue.pop_front() {
        if cur == goal {
            break;
        }
        let flat = mask.flat_index(cur);
        for (n, _) in passable_neighbors(mask, cur) {
            let nf = mask.flat_index(n);
            if parent[nf].is_none() {
                parent[nf] = Some(flat);
                queue.push_back(n);
            }
        }
    }
    let mut flat = mask.flat_index(goal);
    parent[flat]?;
    let mut cells = vec![goal];
    while flat != start {
        flat = parent[flat].expect("visited cells have parents");
        cells.push(mask.index_of(flat));
    }
    cells.reverse();
    Some(PathPlan::from_cells(spec, cells))
}

#[derive(Clone, Copy)]
struct Front {
    t: f64,
    flat: usize,
}

impl PartialEq for Front {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Front {}
impl Ord for Front {
    fn cmp(&self, other: &Self) -> Ordering {
        other.t.total_cmp(&self.t).then_with(|| other.flat.cmp(&self.flat))
    }
}
impl PartialOrd for Front {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const AXES4: [(isize, isize); 4] = [(0, -1), (0, 1), (-1, 0), (1, 0)];

/// Arrival times (meters at unit speed) from `source` over the free cells
/// of `mask`, by first-order upwind fast marching on the 4-neighbour
/// stencil. Unreached cells hold `f64::INFINITY`.
pub fn fmm_arrival(mask: &Grid<bool>, h: f64, source: GridIndex) -> Grid<f64> {
    let mut t = Grid::filled(mask.rows(), mask.cols(), f64::INFINITY);
    if !mask.get(source).copied().unwrap_or(false) {
        return t;
    }
    let mut known = Grid::filled(mask.rows(), mask.cols(), false);
    let mut heap = BinaryHeap::new();
    t[source] = 0.0;
    heap.push(Front {
        t: 0.0,
        flat: mask.flat_index(source),
    });
    while let Some(Front { flat, .. }) = heap.pop() {
        let idx = mask.index_of(flat);
        if known[idx] {
            continue;
        }
        known[idx] = true;
        for (dr, dc) in AXES4 {
            let Some(n) = mask.offset(idx, dr, dc) else { continue };
            if !mask[n] || known[n] {
                continue;
            }
            let known_t = |r: isize, c: isize| {
                mask.offset(n, r, c)
                    .filter(|&m| known[m])
                    .map_or(f64::INFINITY, |m| t[m])
            };
            let a = known_t(0, -1).min(known_t(0, 1));
            let b = known_t(-1, 0).min(known_t(1, 0));
            let cand = if (a - b).abs() >= h || !a.is_finite() || !b.is_finite() {
                a.min(b) + h
            } else {
                0.5 * (a + b + (2.0 * h * h - (a - b) * (a - b)).sqrt())
            };
            if cand < t[n] {
                t[n] = cand;
                heap.push(Front {
                    t: cand,
                    flat: mask.flat_index(n),
                });
            }
        }
    }
    t
}

/// Arrival time at a point given in grid units, bilinear between cell
/// centers. Falls back to the containing cell's value when a contributing
/// corner is unreached or off the grid.
pub fn arrival_at(t: &Grid<f64>, u: f64, v: f64) -> f64 {
    let containing = || {
        if u < 0.0 || v < 0.0 {
            return f64::INFINITY;
        }
        t.get(GridIndex::new(v as usize, u as usize)).copied().unwrap_or(f64::INFINITY)
    };
    let x = u - 0.5;
    let y = v - 0.5;
    let c0 = x.floor();
    let r0 = y.floor();
    let fx = x - c0;
    let fy = y - r0;
    let mut sum = 0.0;
    for (dr, dc, w) in [(0, 0, (1.0 - fx) * (1.0 - fy)), (0, 1, fx * (1.0 - fy)), (1, 0, (1.0 - fx) * fy), (1, 1, fx * fy)] {
        if w <= 0.0 {
            continue;
        }
        let r = r0 as isize + dr;
        let c = c0 as isize + dc;
        if !t.in_bounds(r, c) {
            return containing();
        }
        let val = t[GridIndex::new(r as usize, c as usize)];
        if !val.is_finite() {
            return containing();
        }
        sum += w * val;
    }
    sum
}

/// Central-difference gradient of the interpolated field, half a cell to
/// each side. `None` when any sample is unreached.
fn arrival_gradient(t: &Grid<f64>, u: f64, v: f64) -> Option<(f64, f64)> {
    const D: f64 = 0.5;
    let s = [
        arrival_at(t, u + D, v),
        arrival_at(t, u - D, v),
        arrival_at(t, u, v + D),
        arrival_at(t, u, v - D),
    ];
    if s.iter().any(|x| !x.is_finite()) {
        return None;
    }
    Some(((s[0] - s[1]) / (2.0 * D), (s[2] - s[3]) / (2.0 * D)))
}

/// Descent step in cells.
const FMM_STEP: f64 = 0.5;

/// Shortest path by fast marching from the goal, followed by steepest
/// descent on the arrival field from the start. Every accepted path point
/// has a strictly lower interpolated arrival time than the previous one,
/// except possibly the final snap onto the goal center.
pub fn plan_fmm(mask: &Grid<bool>, spec: &GridSpec, from: GridIndex, to: GridIndex) -> Option<PathPlan> {
    if !mask.get(from).copied().unwrap_or(false) {
        return None;
    }
    let goal = resolve_goal(mask, to)?;
    let t = fmm_arrival(mask, spec.cell_size, goal);
    if !t[from].is_finite() {
        return None;
    }
    let center = |c: GridIndex| (c.col as f64 + 0.5, c.row as f64 + 0.5);
    let free_at = |u: f64, v: f64| -> Option<GridIndex> {
        if u < 0.0 || v < 0.0 {
            return None;
        }
        let idx = GridIndex::new(v as usize, u as usize);
        mask.get(idx).copied().unwrap_or(false).then_some(idx)
    };
    let goal_uv = center(goal);
    let mut p = center(from);
    let mut cur_t = arrival_at(&t, p.0, p.1);
    let mut uv = vec![p];
    let max_iter = 4 * mask.len() + 16;
    for _ in 0..max_iter {
        if (p.0 - goal_uv.0).hypot(p.1 - goal_uv.1) <= 1.0 {
            if p != goal_uv {
                uv.push(goal_uv);
            }
            break;
        }
        let mut next = None;
        if let Some((gx, gy)) = arrival_gradient(&t, p.0, p.1) {
            let g = gx.hypot(gy);
            if g > 1e-12 {
                let cand = (p.0 - FMM_STEP * gx / g, p.1 - FMM_STEP * gy / g);
                if free_at(cand.0, cand.1).is_some() {
                    let ct = arrival_at(&t, cand.0, cand.1);
                    if ct < cur_t {
                        next = Some((cand, ct));
                    }
                }
            }
        }
        if next.is_none() {
            let cell = free_at(p.0, p.1)?;
            let best = passable_neighbors(mask, cell)
                .map(|(n, _)| n)
                .min_by(|a, b| t[*a].total_cmp(&t[*b]).then(a.cmp(b)))?;
            let here = center(cell);
            next = if t[cell] < cur_t && here != p {
                Some((here, t[cell]))
            } else {
                Some((center(best), t[best]))
            };
        }
        let (np, nt) = next.expect("set above");
        p = np;
        cur_t = nt;
        uv.push(p);
    }
    if *uv.last().expect("non-empty") != goal_uv {
        return None;
    }
    let points: Vec<Point> = uv.iter().map(|&(u, v)| spec.from_grid_units(u, v)).collect();
    let mut cells: Vec<GridIndex> = Vec::with_capacity(uv.len());
    for &(u, v) in &uv {
        let c = GridIndex::new(v as usize, u as usize);
        if cells.last() != Some(&c) {
            cells.push(c);
        }
    }
    let length = polyline_length(&points);
    Some(PathPlan { cells, points, length })
}

/// Greedy descent on a Dijkstra distance field toward its source.
fn descend(mask: &Grid<bool>, spec: &GridSpec, dist: &Grid<f64>, from: GridIndex) -> Option<PathPlan> {
    if !dist.get(from).is_some_and(|d| d.is_finite()) {
        return None;
    }
    let mut cells = vec![from];
    let mut cur = from;
    while dist[cur] > 0.0 {
        let cs = spec.cell_size;
        cur = passable_neighbors(mask, cur)
            .map(|(n, diag)| (dist[n] + if diag { cs * SQRT_2 } else { cs }, n))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, n)| n)?;
        cells.push(cur);
    }
    let mut plan = PathPlan::from_cells(spec, cells);
    plan.length = dist[from];
    Some(plan)
}

/// Ground-truth shortest path on the scene's navigable mask.
pub fn plan_spf(scene: &Scene, from: Point, to: Point) -> Option<PathPlan> {
    let spec = &scene.spec;
    let a = spec.world_to_grid(from).ok()?;
    let b = resolve_goal(&scene.navigable, spec.world_to_grid(to).ok()?)?;
    let dist = distance_field(&scene.navigable, spec.cell_size, b);
    descend(&scene.navigable, spec, &dist, a)
}

/// Minimum-hop route over `mask` from `from` (which may itself be
/// blocked) to the nearest cell satisfying `done`.
pub fn escape_route(mask: &Grid<bool>, from: GridIndex, done: impl Fn(GridIndex) -> bool) -> Option<Vec<GridIndex>> {
    let mut open = mask.clone();
    open[from] = true;
    let mut parent: Vec<Option<usize>> = vec![None; mask.len()];
    let start = open.flat_index(from);
    parent[start] = Some(start);
    let mut queue = VecDeque::from([from]);
    while let Some(cur) = queue.pop_front() {
        if done(cur) {
            let mut flat = open.flat_index(cur);
            let mut cells = vec![cur];
            while flat != start {
                flat = parent[flat].expect("visited");
                cells.push(open.index_of(flat));
            }
            cells.reverse();
            return Some(cells);
        }
        let flat = open.flat_index(cur);
        for (n, _) in passable_neighbors(&open, cur) {
            let nf = open.flat_index(n);
            if parent[nf].is_none() {
                parent[nf] = Some(flat);
                queue.push_back(n);
            }
        }
    }
    None
}

/// Joins an escape route onto a plan that starts at the route's last cell.
pub fn prepend_route(spec: &GridSpec, route: &[GridIndex], plan: PathPlan) -> PathPlan {
    let mut cells: Vec<GridIndex> = route[..route.len() - 1].to_vec();
    let mut points: Vec<Point> = cells.iter().map(|&c| spec.cell_center(c)).collect();
    cells.extend(plan.cells);
    points.extend(plan.points);
    let length = polyline_length(&points);
    PathPlan { cells, points, length }
}

/// Shortest-path planner on a fixed mask that keeps the distance field of
/// the most recent goal.
#[derive(Debug, Clone)]
pub struct CachedPlanner {
    pub mask: Grid<bool>,
    pub spec: GridSpec,
    cache: Option<(GridIndex, Grid<f64>)>,
}

impl CachedPlanner {
    pub fn new(mask: Grid<bool>, spec: GridSpec) -> Self {
        Self { mask, spec, cache: None }
    }

    /// Refreshes the cached field for the goal nearest `to`.
    fn refresh(&mut self, to: Point) -> Option<()> {
        let b = resolve_goal(&self.mask, self.spec.world_to_grid(to).ok()?)?;
        if self.cache.as_ref().is_none_or(|(g, _)| *g != b) {
            self.cache = Some((b, distance_field(&self.mask, self.spec.cell_size, b)));
        }
        Some(())
    }

    pub fn plan(&mut self, from: Point, to: Point) -> Option<PathPlan> {
        let a = self.spec.world_to_grid(from).ok()?;
        self.refresh(to)?;
        let (_, dist) = self.cache.as_ref()?;
        descend(&self.mask, &self.spec, dist, a)
    }

    /// Like `plan`, but a blocked start cell first walks over `fallback` to
    /// the nearest cell that has a path.
    pub fn plan_escaping(&mut self, fallback: &Grid<bool>, from: Point, to: Point) -> Option<PathPlan> {
        let a = self.spec.world_to_grid(from).ok()?;
        self.refresh(to)?;
        let (_, dist) = self.cache.as_ref()?;
        if self.mask[a] {
            return descend(&self.mask, &self.spec, dist, a);
        }
        let route = escape_route(fallback, a, |c| dist[c].is_finite())?;
        let tail = descend(&self.mask, &self.spec, dist, *route.last().expect("non-empty"))?;
        Some(prepend_route(&self.spec, &route, tail))
    }

    /// Shortest-path distance field toward the goal cell nearest `to`.
    pub fn field(&mut self, to: Point) -> Option<&Grid<f64>> {
        self.refresh(to)?;
        self.cache.as_ref().map(|(_, d)| d)
    }

    /// Center of the cell reachable from `from` that is closest to `to` in
    /// straight-line distance. A blocked start walks over `fallback` first.
    pub fn nearest_reachable(&self, fallback: &Grid<bool>, from: Point, to: Point) -> Option<Point> {
        let a = self.spec.world_to_grid(from).ok()?;
        let start = if self.mask[a] {
            a
        } else {
            *escape_route(fallback, a, |c| self.mask[c])?.last()?
        };
        let reach = distance_field(&self.mask, self.spec.cell_size, start);
        reach
            .iter()
            .filter(|(_, d)| d.is_finite())
            .map(|(c, _)| (self.spec.cell_center(c).distance(to), c))
            .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)))
            .map(|(_, c)| self.spec.cell_center(c))
    }
}

/// Remaining distance from a continuous point: the best of its own cell and
/// the 8 neighbours, each charged the straight hop to its center.
pub fn field_value(dist: &Grid<f64>, spec: &GridSpec, p: Point) -> f64 {
    let Ok(c) = spec.world_to_grid(p) else {
        return f64::INFINITY;
    };
    std::iter::once(c)
        .chain(NEIGHBORS8.iter().filter_map(|&(dr, dc)| dist.offset(c, dr, dc)))
        .map(|n| dist[n] + p.distance(spec.cell_center(n)))
        .fold(f64::INFINITY, f64::min)
}

/// Search budget of `lookahead_plan`.
pub const LOOKAHEAD_NODES: usize = 20_000;

/// Breadth-first search over action sequences of at most `depth` steps for
/// the shortest one that ends with a lower remaining distance. Among
/// sequences of equal length the larger gain wins. Gives up within one step
/// of the goal or past `LOOKAHEAD_NODES` expanded poses.
pub fn lookahead_plan(
    dist: &Grid<f64>,
    spec: &GridSpec,
    pose: &Pose,
    turn_angle: f64,
    step: f64,
    depth: usize,
    blocked: impl Fn(Point, Point) -> bool,
) -> Option<Vec<Action>> {
    let here = field_value(dist, spec, pose.position());
    if here <= step {
        return None;
    }
    let turns = (std::f64::consts::TAU / turn_angle).round() as i64;
    let key = |p: &Pose| {
        let h = ((p.heading / turn_angle).round() as i64).rem_euclid(turns);
        ((p.x * 1e3).round() as i64, (p.y * 1e3).round() as i64, h)
    };
    // (pose, parent node, action taken from the parent)
    let mut nodes: Vec<(Pose, usize, Action)> = vec![(*pose, 0, Action::Forward)];
    let mut seen = std::collections::HashSet::from([key(pose)]);
    let mut layer = vec![0usize];
    for _ in 0..depth {
        let mut next_layer = Vec::new();
        for &n in &layer {
            let p = nodes[n].0;
            for (a, q) in [
                (Action::Forward, p.advanced(step)),
                (Action::TurnLeft, p.turned(turn_angle)),
                (Action::TurnRight, p.turned(-turn_angle)),
            ] {
                if a == Action::Forward && blocked(p.position(), q.position()) {
                    continue;
                }
                if seen.insert(key(&q)) {
                    nodes.push((q, n, a));
                    next_layer.push(nodes.len() - 1);
                }
            }
        }
        let best = next_layer
            .iter()
            .map(|&n| (here - field_value(dist, spec, nodes[n].0.position()), n))
            .filter(|(g, _)| *g > 1e-9)
            .max_by(|x, y| x.0.total_cmp(&y.0));
        if let Some((_, mut n)) = best {
            let mut actions = Vec::new();
            while n != 0 {
                actions.push(nodes[n].2);
                n = nodes[n].1;
            }
            actions.reverse();
            return Some(actions);
        }
        if next_layer.is_empty() || nodes.len() > LOOKAHEAD_NODES {
            return None;
        }
        layer = next_layer;
    }
    None
}

/// Greedy follower over a distance field. Of the headings reachable by
/// whole turns, picks the one whose forward step (collision-free per
/// `blocked`) most reduces the remaining distance, preferring fewer turns
/// on ties; steps forward when already facing it, else turns the short way.
/// None when no heading makes progress.
pub fn greedy_action(
    dist: &Grid<f64>,
    spec: &GridSpec,
    pose: &Pose,
    turn_angle: f64,
    step: f64,
    blocked: impl Fn(Point, Point) -> bool,
) -> Option<Action> {
    let here = field_value(dist, spec, pose.position());
    let max_turns = (std::f64::consts::PI / turn_angle).ceil() as usize;
    let mut best: Option<(f64, Action)> = None;
    for k in 0..=max_turns {
        for (sign, turn) in [(1.0, Action::TurnLeft), (-1.0, Action::TurnRight)] {
            if k == 0 && sign < 0.0 {
                continue;
            }
            let moved = pose.turned(sign * k as f64 * turn_angle).advanced(step);
            if blocked(pose.position(), moved.position()) {
                continue;
            }
            let gain = here - field_value(dist, spec, moved.position());
            if gain > 1e-9 && best.is_none_or(|(b, _)| gain > b + 1e-9) {
                best = Some((gain, if k == 0 { Action::Forward } else { turn }));
            }
        }
    }
    best.map(|(_, a)| a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NavigatorConfig {
    pub backend: Backend,
    /// Chebyshev obstacle inflation, cells.
    pub dilation_radius: usize,
    /// Map-based planners replan after this many steps.
    pub replan_every: usize,
    /// Waypoints closer than this are dropped.
    pub reach_tolerance: f64,
    /// Bearing error above which the agent turns instead of moving.
    pub turn_tolerance: f64,
    /// Found is issued this close to the believed goal (MultiON).
    pub found_trigger_distance: f64,
    /// Stop is issued this close to the believed goal (ObjectNav).
    pub stop_trigger_distance: f64,
    /// Actions per stuck window and per untrap phase.
    pub stuck_actions: usize,
    pub stuck_displacement: f64,
}

impl Default for NavigatorConfig {
    fn default() -> Self {
        Self {
            backend: Backend::SpfOracle,
            dilation_radius: 1,
            replan_every: 5,
            reach_tolerance: 0.2,
            turn_tolerance: 15f64.to_radians(),
            found_trigger_distance: 0.8,
            stop_trigger_distance: 1.25,
            stuck_actions: 6,
            stuck_displacement: 0.05,
        }
    }
}

impl NavigatorConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.replan_every == 0 {
            return Err("replan_every must be >= 1".into());
        }
        if self.stuck_actions < 2 {
            return Err("stuck_actions must be >= 2".into());
        }
        for (name, v) in [
            ("reach_tolerance", self.reach_tolerance),
            ("turn_tolerance", self.turn_tolerance),
            ("found_trigger_distance", self.found_trigger_distance),
            ("stop_trigger_distance", self.stop_trigger_distance),
            ("stuck_displacement", self.stuck_displacement),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive"));
            }
        }
        Ok(())
    }
}

/// Turn-or-forward toward the first waypoint farther than the reach
/// tolerance. Returns `None` once every waypoint is consumed.
pub fn next_action(waypoints: &mut VecDeque<Point>, pose: &Pose, cfg: &NavigatorConfig) -> Option<Action> {
    while let Some(&w) = waypoints.front() {
        if pose.position().distance(w) <= cfg.reach_tolerance {
            waypoints.pop_front();
        } else {
            break;
        }
    }
    let w = *waypoints.front()?;
    let err = pose.bearing_to(w);
    Some(if err > cfg.turn_tolerance {
        Action::TurnLeft
    } else if err < -cfg.turn_tolerance {
        Action::TurnRight
    } else {
        Action::Forward
    })
}

/// Found (or Stop) once the agent is within the trigger distance of the
/// believed goal.
pub fn issue_found(pose: &Pose, goal_point: Point, trigger: f64, stop_mode: bool) -> Option<Action> {
    (pose.position().distance(goal_point) <= trigger).then_some(if stop_mode { Action::Stop } else { Action::Found })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UntrapPhase {
    #[default]
    Inactive,
    LeftForward,
    RightForward,
}

/// Scripted escape: alternating turn/forward bursts. A burst without net
/// displacement switches to the other turn direction; a burst that moves
/// the agent ends the escape.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UntrapState {
    pub phase: UntrapPhase,
    pub emitted: usize,
    phase_start: Option<Point>,
}

impl UntrapState {
    pub fn is_active(&self) -> bool {
        self.phase != UntrapPhase::Inactive
    }

    pub fn activate(&mut self, pose: &Pose) {
        if !self.is_active() {
            self.phase = UntrapPhase::LeftForward;
            self.emitted = 0;
            self.phase_start = Some(pose.position());
        }
    }

    /// Next scripted action, or `None` when inactive or just released.
    pub fn next(&mut self, pose: &Pose, cfg: &NavigatorConfig) -> Option<Action> {
        if !self.is_active() {
            return None;
        }
        if self.emitted >= cfg.stuck_actions {
            let start = self.phase_start.unwrap_or(pose.position());
            if pose.position().distance(start) > cfg.stuck_displacement {
                *self = Self::default();
                return None;
            }
            self.phase = match self.phase {
                UntrapPhase::LeftForward => UntrapPhase::RightForward,
                _ => UntrapPhase::LeftForward,
            };
            self.emitted = 0;
            self.phase_start = Some(pose.position());
        }
        let action = if self.emitted % 2 == 1 {
            Action::Forward
        } else if self.phase == UntrapPhase::LeftForward {
            Action::TurnLeft
        } else {
            Action::TurnRight
        };
        self.emitted += 1;
        Some(action)
    }
}

/// Flags a stuck agent: a window of actions containing a collision over
/// which the agent moved no more than the displacement threshold.
#[derive(Debug, Clone, Default)]
pub struct StuckDetector {
    history: VecDeque<(Point, bool)>,
}

impl StuckDetector {
    pub fn push(&mut self, position: Point, collided: bool, cfg: &NavigatorConfig) -> bool {
        self.history.push_back((position, collided));
        while self.history.len() > cfg.stuck_actions + 1 {
            self.history.pop_front();
        }
        if self.history.len() <= cfg.stuck_actions {
            return false;
        }
        let first = self.history.front().expect("non-empty").0;
        let any_collision = self.history.iter().skip(1).any(|&(_, c)| c);
        any_collision && self.history.iter().all(|&(p, _)| p.distance(first) <= cfg.stuck_displacement)
    }

    pub fn clear(&mut self) {
        self.history.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open(rows: usize, cols: usize) -> (Grid<bool>, GridSpec) {
        (
            Grid::filled(rows, cols, true),
            GridSpec::new(0.2, rows, cols, Point::new(0.0, 0.0)).unwrap(),
        )
    }

    #[test]
    fn bfs_examples() {
        let (m, s) = open(20, 20);
        let p = plan_bfs(&m, &s, GridIndex::new(0, 0), GridIndex::new(0, 1)).unwrap();
        assert_eq!(p.hops(), 1);
        let p = plan_bfs(&m, &s, GridIndex::new(0, 0), GridIndex::new(19, 19)).unwrap();
        assert_eq!(p.hops(), 19);
        assert!((p.length - 19.0 * 0.2 * SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn bfs_blocked_goal_snaps_or_fails() {
        let (mut m, s) = open(10, 10);
        m[GridIndex::new(5, 5)] = false;
        let p = plan_bfs(&m, &s, GridIndex::new(0, 0), GridIndex::new(5, 5)).unwrap();
        assert_eq!(*p.cells.last().unwrap(), GridIndex::new(4, 5));
        let walled = Grid::from_fn(10, 10, |i| i.row < 2);
        assert!(plan_bfs(&walled, &s, GridIndex::new(0, 0), GridIndex::new(9, 9)).is_none());
    }

    #[test]
    fn fmm_straight_and_lower_bound() {
        let (m, s) = open(30, 30);
        let t = fmm_arrival(&m, 0.2, GridIndex::new(3, 3));
        for (idx, &v) in t.iter() {
            let e = s.cell_center(idx).distance(s.cell_center(GridIndex::new(3, 3)));
            assert!(v >= e - 1e-9, "{idx:?}");
        }
        let p = plan_fmm(&m, &s, GridIndex::new(3, 3), GridIndex::new(3, 25)).unwrap();
        assert!((p.length - 22.0 * 0.2).abs() < 1e-9);
    }

    #[test]
    fn fmm_uses_single_gap() {
        let (mut m, s) = open(15, 15);
        for r in 0..15 {
            if r != 11 {
                m[GridIndex::new(r, 7)] = false;
            }
        }
        let p = plan_fmm(&m, &s, GridIndex::new(2, 2), GridIndex::new(2, 12)).unwrap();
        assert!(p.cells.contains(&GridIndex::new(11, 7)));
        assert!(p.cells.iter().all(|&c| m[c]));
        assert!(p.cells.windows(2).all(|w| w[0].is_adjacent8(w[1])));
    }

    #[test]
    fn spf_identical_endpoints() {
        let scene = Scene::from_obstacles("t", 0, open(10, 10).1, Grid::filled(10, 10, false));
        let p = plan_spf(&scene, Point::new(0.5, 0.5), Point::new(0.5, 0.5)).unwrap();
        assert_eq!(p.hops(), 0);
        assert_eq!(p.length, 0.0);
    }

    #[test]
    fn greedy_follows_field() {
        let (mask, spec) = open(10, 10);
        let dist = distance_field(&mask, spec.cell_size, GridIndex::new(5, 9));
        let turn = 30f64.to_radians();
        let act = |heading: f64, blocked: bool| {
            let pose = Pose::new(0.5, 1.1, heading.to_radians());
            greedy_action(&dist, &spec, &pose, turn, 0.25, |_, b| blocked && b.x > 0.6)
        };
        assert_eq!(act(0.0, false), Some(Action::Forward));
        assert_eq!(act(90.0, false), Some(Action::TurnRight));
        assert_eq!(act(-90.0, false), Some(Action::TurnLeft));
        assert_eq!(act(0.0, true), None);
        let at_goal = Pose::new(spec.cell_center(GridIndex::new(5, 9)).x, 1.1, 0.0);
        assert_eq!(greedy_action(&dist, &spec, &at_goal, turn, 0.25, |_, _| false), None);
    }

    #[test]
    fn controller_turns_and_advances() {
        let cfg = NavigatorConfig::default();
        let pose = Pose::new(0.0, 0.0, 0.0);
        let mut ahead = VecDeque::from([Point::new(1.0, 0.0)]);
        assert_eq!(next_action(&mut ahead, &pose, &cfg), Some(Action::Forward));
        let mut left = VecDeque::from([Point::new(0.0, 1.0)]);
        assert_eq!(next_action(&mut left, &pose, &cfg), Some(Action::TurnLeft));
        let mut right = VecDeque::from([Point::new(0.0, -1.0)]);
        assert_eq!(next_action(&mut right, &pose, &cfg), Some(Action::TurnRight));
        let mut done = VecDeque::from([Point::new(0.1, 0.0)]);
        assert_eq!(next_action(&mut done, &pose, &cfg), None);
    }

    #[test]
    fn found_trigger() {
        let pose = Pose::new(0.0, 0.0, 0.0);
        assert_eq!(issue_found(&pose, Point::new(0.5, 0.0), 0.8, false), Some(Action::Found));
        assert_eq!(issue_found(&pose, Point::new(0.95, 0.0), 0.8, false), None);
        assert_eq!(issue_found(&pose, Point::new(0.5, 0.0), 0.8, true), Some(Action::Stop));
    }

    #[test]
    fn untrap_sequence_switches_without_motion() {
        let cfg = NavigatorConfig::default();
        let pose = Pose::new(1.0, 1.0, 0.0);
        let mut u = UntrapState::default();
        assert_eq!(u.next(&pose, &cfg), None);
        u.activate(&pose);
        let seq: Vec<Action> = (0..8).map(|_| u.next(&pose, &cfg).unwrap()).collect();
        use Action::*;
        assert_eq!(seq, vec![TurnLeft, Forward, TurnLeft, Forward, TurnLeft, Forward, TurnRight, Forward]);
        let moved = Pose::new(1.5, 1.0, 0.0);
        for _ in 0..4 {
            u.next(&pose, &cfg);
        }
        assert_eq!(u.next(&moved, &cfg), None);
        assert!(!u.is_active());
    }

    #[test]
    fn stuck_needs_collision_and_no_motion() {
        let cfg = NavigatorConfig::default();
        let p = Point::new(0.0, 0.0);
        let mut d = StuckDetector::default();
        assert!(!(0..10).any(|_| d.push(p, false, &cfg)));
        let mut d = StuckDetector::default();
        let flags: Vec<bool> = (0..7).map(|i| d.push(p, i == 3, &cfg)).collect();
        assert!(flags[6] && !flags[5]);
    }
}
