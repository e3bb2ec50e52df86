use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use super::{success_check_objectnav, Episode, ObjectCategory, Scene, TaskMode, WorldError};
use crate::geometry::{raycast_unchecked, segment_entry_param, walk_supercover, Point, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Forward,
    TurnLeft,
    TurnRight,
    Found,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    AllGoalsFound,
    WrongFound,
    OutOfSteps,
    Stopped { success: bool },
}

/// Simulator-side agent state. `pose` is in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub pose: Pose,
    pub steps: usize,
    pub goal_index: usize,
    pub termination: Option<Termination>,
}

impl AgentState {
    pub fn is_over(&self) -> bool {
        self.termination.is_some()
    }
}

/// Ground-truth view of an object inside the sensor cone. Object ids are
/// withheld.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibleObject {
    pub category: ObjectCategory,
    pub color: [u8; 3],
    pub range: f64,
    pub bearing: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthRay {
    /// Relative to the agent heading, positive to the left.
    pub bearing: f64,
    pub range: f64,
    /// False when the ray reached full range without meeting an obstacle.
    pub hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Position relative to the episode start; heading is the absolute
    /// compass heading.
    pub pose: Pose,
    pub current_goal: Option<ObjectCategory>,
    pub visible_objects: Vec<VisibleObject>,
    pub depth: Vec<DepthRay>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub collided: bool,
    pub episode_over: bool,
    pub goal_consumed: bool,
    pub termination: Option<Termination>,
}

/// Stateless stepper over an immutable scene and episode. Many simulators
/// can share one scene.
#[derive(Debug, Clone, Copy)]
pub struct Simulator<'a> {
    scene: &'a Scene,
    episode: &'a Episode,
}

impl<'a> Simulator<'a> {
    pub fn new(scene: &'a Scene, episode: &'a Episode) -> Result<Self, WorldError> {
        if scene.id != episode.scene_id {
            return Err(WorldError::SceneMismatch {
                episode: episode.id.clone(),
                expected: episode.scene_id.clone(),
                actual: scene.id.clone(),
            });
        }
        episode.task.validate()?;
        Ok(Self { scene, episode })
    }

    pub fn scene(&self) -> &'a Scene {
        self.scene
    }

    pub fn episode(&self) -> &'a Episode {
        self.episode
    }

    pub fn reset(&self) -> (AgentState, Observation) {
        let state = AgentState {
            pose: self.episode.start,
            steps: 0,
            goal_index: 0,
            termination: None,
        };
        let obs = self.observe(&state);
        (state, obs)
    }

    pub fn to_relative(&self, p: Point) -> Point {
        p.sub(self.episode.start.position())
    }

    pub fn to_world(&self, p: Point) -> Point {
        p.add(self.episode.start.position())
    }

    pub fn observe(&self, state: &AgentState) -> Observation {
        let task = &self.episode.task;
        let sensor = task.sensor;
        let pose = state.pose;
        let pos = pose.position();
        let mut depth = Vec::with_capacity(sensor.rays);
        for i in 0..sensor.rays {
            let bearing = -sensor.fov / 2.0 + sensor.fov * i as f64 / (sensor.rays - 1) as f64;
            let dir = Point::from_angle(pose.heading + bearing);
            let far = pos.add(dir.scale(sensor.range));
            depth.push(self.cast_depth(pos, far, bearing, sensor.range));
        }

        let mut visible_objects = Vec::new();
        for obj in &self.episode.objects {
            let range = pos.distance(obj.position);
            if range > sensor.range {
                continue;
            }
            let bearing = if range < 1e-9 { 0.0 } else { pose.bearing_to(obj.position) };
            if bearing.abs() > sensor.fov / 2.0 + 1e-12 {
                continue;
            }
            if raycast_unchecked(&self.scene.obstacles, &self.scene.spec, pos, obj.position).is_blocked() {
                continue;
            }
            visible_objects.push(VisibleObject {
                category: obj.category,
                color: obj.color,
                range,
                bearing,
            });
        }

        let rel = self.to_relative(pos);
        Observation {
            pose: Pose::new(rel.x, rel.y, pose.heading),
            current_goal: self.current_goal(state),
            visible_objects,
            depth,
        }
    }

    fn cast_depth(&self, from: Point, far: Point, bearing: f64, max_range: f64) -> DepthRay {
        let spec = &self.scene.spec;
        let Some((a, b)) = spec.clip_segment(from, far) else {
            return DepthRay {
                bearing,
                range: 0.0,
                hit: true,
            };
        };
        let mut hit_cell = None;
        walk_supercover(spec, a, b, |c| {
            if self.scene.obstacles[c] {
                hit_cell = Some(c);
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        });
        let seg_len = a.distance(b);
        match hit_cell {
            Some(c) => {
                let t = segment_entry_param(spec, c, a, b).unwrap_or(0.0);
                DepthRay {
                    bearing,
                    range: (from.distance(a) + t * seg_len).min(max_range),
                    hit: true,
                }
            }
            None => DepthRay {
                bearing,
                range: from.distance(b),
                // Clipped at the grid border counts as a hit on the outside.
                hit: seg_len + 1e-9 < max_range,
            },
        }
    }

    pub fn current_goal(&self, state: &AgentState) -> Option<ObjectCategory> {
        self.episode.goal(state.goal_index).map(|o| o.category)
    }

    pub fn step(&self, state: &AgentState, action: Action) -> Result<(AgentState, StepOutcome), WorldError> {
        if state.is_over() {
            return Err(WorldError::EpisodeOver);
        }
        let task = &self.episode.task;
        let mode = task.mode;
        match (action, mode) {
            (Action::Found, TaskMode::Objectnav) | (Action::Stop, TaskMode::Multion) => {
                return Err(WorldError::ActionInvalidForMode { action, mode });
            }
            _ => {}
        }

        let mut next = *state;
        next.steps += 1;
        let mut collided = false;
        let mut goal_consumed = false;
        match action {
            Action::Forward => {
                let moved = state.pose.advanced(task.forward_step);
                if self.scene.sweep_collides(state.pose.position(), moved.position(), task.agent_radius) {
                    collided = true;
                } else {
                    next.pose = moved;
                }
            }
            Action::TurnLeft => next.pose = state.pose.turned(task.turn_angle),
            Action::TurnRight => next.pose = state.pose.turned(-task.turn_angle),
            Action::Found => {
                let goal = self.episode.goal(state.goal_index).expect("active episode has a current goal");
                if state.pose.position().distance(goal.position) <= task.success_radius {
                    goal_consumed = true;
                    next.goal_index += 1;
                    if next.goal_index == self.episode.goals.len() {
                        next.termination = Some(Termination::AllGoalsFound);
                    }
                } else {
                    next.termination = Some(Termination::WrongFound);
                }
            }
            Action::Stop => {
                let success = success_check_objectnav(&state.pose, self.episode);
                if success {
                    goal_consumed = true;
                    next.goal_index = 1;
                }
                next.termination = Some(Termination::Stopped { success });
            }
        }
        if next.termination.is_none() && next.steps >= task.max_steps {
            next.termination = Some(Termination::OutOfSteps);
        }
        let observation = self.observe(&next);
        Ok((
            next,
            StepOutcome {
                observation,
                collided,
                episode_over: next.termination.is_some(),
                goal_consumed,
                termination: next.termination,
            },
        ))
    }
}
