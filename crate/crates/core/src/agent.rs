//! The modular agent: detector, map builder, exploration, planning and
//! navigation composed into one policy.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exploration::{self, ExplorationConfig, ExplorationError, ExplorationState, Strategy};
use crate::geometry::{Grid, GridIndex, GridSpec, Point, Pose};
use crate::mapping::{dilate_mask, dilate_obstacles, Maps};
use crate::navigation::{
    escape_route, field_value, greedy_action, issue_found, lookahead_plan, next_action, plan_bfs, plan_fmm, prepend_route, Backend, CachedPlanner, NavigatorConfig,
    StuckDetector, UntrapState,
};
use crate::perception::{detect, ColorPrototypeSet, DetectorConfig, PerceptionMode};
use crate::planning::{select_target, PlanTarget, TargetKind};
use crate::world::{Action, ObjectCategory, Observation, Scene, TaskConfig, TaskMode};

/// Action budget of the oracle follower's search when no single step helps.
const LOOKAHEAD_DEPTH: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub perception: PerceptionMode,
    pub detector: DetectorConfig,
    pub exploration: ExplorationConfig,
    pub navigation: NavigatorConfig,
    /// Samples per class in the synthetic color prototype set.
    pub prototypes_per_class: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            perception: PerceptionMode::Oracle,
            detector: DetectorConfig::default(),
            exploration: ExplorationConfig::default(),
            navigation: NavigatorConfig::default(),
            prototypes_per_class: 27,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.detector.validate().map_err(|e| e.to_string())?;
        self.exploration.validate().map_err(|e| e.to_string())?;
        self.navigation.validate()?;
        if self.prototypes_per_class < self.detector.k_neighbors {
            return Err("prototypes_per_class must be >= k_neighbors".into());
        }
        Ok(())
    }
}

/// Ground truth for the oracle backend, in world frame.
struct OracleNav {
    scene: Scene,
    dilated: CachedPlanner,
    raw: CachedPlanner,
    offset: Point,
}

/// Why the agent chose its last action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intent {
    Found,
    Navigate,
    Untrap,
    LookAround,
}

pub struct Agent {
    cfg: AgentConfig,
    task: TaskConfig,
    prototypes: ColorPrototypeSet,
    rng: ChaCha8Rng,
    pub maps: Maps,
    pub exploration: ExplorationState,
    untrap: UntrapState,
    stuck: StuckDetector,
    oracle: Option<OracleNav>,
    /// Committed lookahead actions of the oracle follower and their goal cell.
    oracle_queue: (Option<GridIndex>, VecDeque<Action>),
    /// Where the last lookahead found nothing; not retried until the agent moves.
    lookahead_failed_at: Option<Point>,
    waypoints: VecDeque<Point>,
    plan_goal: Option<GridIndex>,
    steps_since_plan: usize,
    last_goal: Option<ObjectCategory>,
    pub last_target: Option<PlanTarget>,
    pub last_intent: Option<Intent>,
    /// Steps spent toward the current exploration goal, maximum over the
    /// episode; checked against the fail-safe bound by tests.
    pub max_exploration_steps: usize,
}

impl Agent {
    /// `scene` and `start` are only consulted by the oracle backend.
    pub fn new(cfg: AgentConfig, task: TaskConfig, seed: u64, scene: &Scene, start: Point) -> Self {
        let oracle = (cfg.navigation.backend == Backend::SpfOracle).then(|| {
            let r = cfg.navigation.dilation_radius;
            let occ = scene.navigable_for(task.agent_radius).map(|&n| !n);
            let dilated = dilate_mask(&occ, r);
            OracleNav {
                scene: scene.clone(),
                dilated: CachedPlanner::new(dilated, scene.spec),
                raw: CachedPlanner::new(occ.map(|&o| !o), scene.spec),
                offset: start,
            }
        });
        Self {
            cfg,
            task,
            prototypes: ColorPrototypeSet::canonical(cfg.prototypes_per_class),
            rng: ChaCha8Rng::seed_from_u64(seed),
            maps: Maps::new(),
            exploration: ExplorationState::default(),
            untrap: UntrapState::default(),
            stuck: StuckDetector::default(),
            oracle,
            waypoints: VecDeque::new(),
            oracle_queue: (None, VecDeque::new()),
            lookahead_failed_at: None,
            plan_goal: None,
            steps_since_plan: 0,
            last_goal: None,
            last_target: None,
            last_intent: None,
            max_exploration_steps: 0,
        }
    }

    pub fn with_prototypes(mut self, prototypes: ColorPrototypeSet) -> Self {
        self.prototypes = prototypes;
        self
    }

    /// One policy step. `collided` reports whether the previous Forward
    /// was blocked.
    pub fn act(&mut self, obs: &Observation, collided: bool) -> Action {
        let detections = detect(
            obs,
            &self.cfg.detector,
            self.cfg.perception,
            &self.prototypes,
            self.task.sensor.fov,
            &mut self.rng,
        );
        self.maps.integrate(obs, &detections);
        let pose = obs.pose;
        if collided {
            self.maps.record_collision(&pose, self.task.forward_step);
            self.waypoints.clear();
        }
        if self.stuck.push(pose.position(), collided, &self.cfg.navigation) {
            self.untrap.activate(&pose);
            self.stuck.clear();
        }
        if self.last_goal != obs.current_goal {
            self.last_goal = obs.current_goal;
            self.exploration = ExplorationState::default();
            self.waypoints.clear();
            self.plan_goal = None;
        }

        let Some(goal) = obs.current_goal else {
            self.last_intent = Some(Intent::LookAround);
            return Action::TurnLeft;
        };
        let on_map = self.maps.semantic.contains_category(goal);
        let expl_goal = if on_map { None } else { Some(self.exploration_goal(pose.position())) };
        let target = select_target(&self.maps, pose.position(), goal, expl_goal).expect("target exists");

        if target.kind == TargetKind::TaskGoal {
            let (trigger, stop) = match self.task.mode {
                TaskMode::Multion => (self.cfg.navigation.found_trigger_distance, false),
                TaskMode::Objectnav => (self.cfg.navigation.stop_trigger_distance, true),
            };
            if let Some(a) = issue_found(&pose, target.point, trigger, stop) {
                self.last_intent = Some(Intent::Found);
                self.last_target = Some(target);
                self.waypoints.clear();
                self.untrap = UntrapState::default();
                return a;
            }
        }

        if let Some(a) = self.untrap.next(&pose, &self.cfg.navigation) {
            self.last_intent = Some(Intent::Untrap);
            self.last_target = Some(target);
            return a;
        }

        let action = self.navigate(&pose, &target, collided);
        self.last_target = Some(target);
        action
    }

    fn exploration_goal(&mut self, pos: Point) -> Point {
        let cfg = self.cfg.exploration;
        if let Some(g) = self.exploration.goal {
            let reached = pos.distance(g) <= cfg.reach_radius;
            let resample = exploration::tick(&mut self.exploration, reached, &cfg);
            self.max_exploration_steps = self.max_exploration_steps.max(self.exploration.steps_toward_goal);
            if !resample {
                return g;
            }
        }
        self.waypoints.clear();
        self.plan_goal = None;
        match exploration::propose(&cfg, &self.maps, pos, &mut self.exploration, &mut self.rng) {
            Ok(g) => g,
            Err(ExplorationError::NoFrontier) | Err(ExplorationError::InvalidConfig(_)) => {
                let fallback = ExplorationConfig {
                    strategy: Strategy::Uniform,
                    ..cfg
                };
                exploration::propose(&fallback, &self.maps, pos, &mut self.exploration, &mut self.rng)
                    .expect("uniform proposal cannot fail")
            }
        }
    }

    fn navigate(&mut self, pose: &Pose, target: &PlanTarget, collided: bool) -> Action {
        let nav = self.cfg.navigation;
        if self.oracle.is_some() {
            let cell = self.goal_cell(target.point);
            if collided || self.oracle_queue.0 != Some(cell) {
                self.oracle_queue = (Some(cell), VecDeque::new());
            }
            if let Some(a) = self.oracle_queue.1.pop_front() {
                self.last_intent = Some(Intent::Navigate);
                return a;
            }
            return match self.oracle_action(pose, target) {
                Some(Some(a)) => {
                    self.last_intent = Some(Intent::Navigate);
                    a
                }
                Some(None) => {
                    self.last_intent = Some(Intent::LookAround);
                    Action::TurnLeft
                }
                None => {
                    self.untrap.activate(pose);
                    self.last_intent = Some(Intent::Untrap);
                    self.untrap.next(pose, &nav).expect("just activated")
                }
            };
        }
        let goal_cell = self.goal_cell(target.point);
        let stale = self.waypoints.is_empty()
            || self.plan_goal != Some(goal_cell)
            || collided
            || self.steps_since_plan >= nav.replan_every;
        if stale {
            self.steps_since_plan = 0;
            self.plan_goal = Some(goal_cell);
            match self.plan(pose.position(), target.point) {
                Some(points) => self.waypoints = points.into(),
                None => {
                    self.waypoints.clear();
                    self.untrap.activate(pose);
                    self.last_intent = Some(Intent::Untrap);
                    return self.untrap.next(pose, &nav).expect("just activated");
                }
            }
        }
        self.steps_since_plan += 1;
        match next_action(&mut self.waypoints, pose, &nav) {
            Some(a) => {
                self.last_intent = Some(Intent::Navigate);
                a
            }
            None => {
                self.last_intent = Some(Intent::LookAround);
                Action::TurnLeft
            }
        }
    }

    /// Greedy step on the ground-truth distance field. Outer None when no
    /// field reaches the agent; inner None when no action makes progress.
    ///
    /// The dilated mask is tried first. Task goals then fall back to the
    /// raw mask before settling for the closest reachable cell; exploration
    /// goals settle first, since a raw-only passage has no clearance.
    fn oracle_action(&mut self, pose: &Pose, target: &PlanTarget) -> Option<Option<Action>> {
        let o = self.oracle.as_mut().expect("oracle backend");
        let wpose = Pose::new(pose.x + o.offset.x, pose.y + o.offset.y, pose.heading);
        let wp = wpose.position();
        let wt = clamp_into(&o.dilated.spec, target.point.add(o.offset));
        let spec = o.dilated.spec;
        let reaches = |f: Option<&Grid<f64>>| f.filter(|d| field_value(d, &spec, wp).is_finite()).cloned();
        let dilated = reaches(o.dilated.field(wt));
        let raw = |o: &mut OracleNav| reaches(o.raw.field(wt));
        let settle = |o: &mut OracleNav| {
            let b = o.dilated.nearest_reachable(&o.raw.mask, wp, wt)?;
            reaches(o.dilated.field(b))
        };
        let field = match target.kind {
            TargetKind::TaskGoal => dilated.or_else(|| raw(o)).or_else(|| settle(o)),
            TargetKind::Exploration => dilated.or_else(|| raw(o)).or_else(|| settle(o)),
        }?;
        let (scene, radius) = (&o.scene, self.task.agent_radius);
        let blocked = |a: Point, b: Point| scene.sweep_collides(a, b, radius);
        let (turn, step) = (self.task.turn_angle, self.task.forward_step);
        if let Some(a) = greedy_action(&field, &spec, &wpose, turn, step, blocked) {
            return Some(Some(a));
        }
        if self.lookahead_failed_at.is_some_and(|p| p.distance(wp) < 1e-6) {
            return Some(None);
        }
        let plan = lookahead_plan(&field, &spec, &wpose, turn, step, LOOKAHEAD_DEPTH, blocked);
        self.lookahead_failed_at = plan.is_none().then_some(wp);
        let mut queue: VecDeque<Action> = plan.unwrap_or_default().into();
        let first = queue.pop_front();
        self.oracle_queue.1 = queue;
        Some(first)
    }

    /// Cell identity of a target, for replanning decisions.
    fn goal_cell(&self, p: Point) -> GridIndex {
        let spec = self.maps.spec();
        let (u, v) = spec.to_grid_units(p);
        GridIndex::new(v.max(0.0) as usize, u.max(0.0) as usize)
    }

    /// Waypoints in the episode frame, excluding the agent's own cell.
    fn plan(&mut self, from: Point, to: Point) -> Option<Vec<Point>> {
        let nav = self.cfg.navigation;
        self.maps.ensure_contains(to);
        let spec = *self.maps.spec();
        let from_cell = spec.world_to_grid(from).ok()?;
        let to_cell = spec.world_to_grid(to).ok()?;
        let raw = dilate_obstacles(&self.maps.occupancy, 0);
        let dilated = dilate_obstacles(&self.maps.occupancy, nav.dilation_radius);
        let plan_on = |mask: &Grid<bool>, from: GridIndex| match nav.backend {
            Backend::Fmm => plan_fmm(mask, &spec, from, to_cell),
            _ => plan_bfs(mask, &spec, from, to_cell),
        };
        let plan = if dilated[from_cell] {
            plan_on(&dilated, from_cell)
        } else {
            escape_route(&raw, from_cell, |c| dilated[c])
                .and_then(|route| plan_on(&dilated, *route.last()?).map(|p| prepend_route(&spec, &route, p)))
        };
        let plan = plan.or_else(|| {
            let mut open = raw.clone();
            open[from_cell] = true;
            plan_on(&open, from_cell)
        })?;
        Some(plan.points.into_iter().skip(1).collect())
    }
}

fn clamp_into(spec: &GridSpec, p: Point) -> Point {
    let hi = spec.max_corner();
    let e = 1e-6;
    Point::new(p.x.clamp(spec.origin.x + e, hi.x - e), p.y.clamp(spec.origin.y + e, hi.y - e))
}
