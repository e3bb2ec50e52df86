//! Exploration goal proposals used while the current goal is not on the map.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{distance_field, GridIndex, Point, NEIGHBORS8};
use crate::mapping::{CellState, Maps};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExplorationError {
    #[error("no frontier cell on the map")]
    NoFrontier,
    #[error("invalid exploration config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Uniform,
    UniformNoFailsafe,
    Stubborn,
    Frontier,
}

impl Strategy {
    pub fn has_failsafe(self) -> bool {
        self != Strategy::UniformNoFailsafe
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplorationConfig {
    pub strategy: Strategy,
    /// Steps allowed toward one goal before a new one is sampled.
    pub alpha_exp: usize,
    /// Side of the uniform sampling window, meters.
    pub l_r: f64,
    /// Side of the stubborn local square, meters.
    pub l_s: f64,
    /// Distance past the frontier cell, meters.
    pub frontier_offset: f64,
    /// A goal counts as reached within this distance.
    pub reach_radius: f64,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Uniform,
            alpha_exp: 50,
            l_r: 10.0,
            l_s: 3.0,
            frontier_offset: 2.0,
            reach_radius: 0.4,
        }
    }
}

impl ExplorationConfig {
    pub fn validate(&self) -> Result<(), ExplorationError> {
        if self.alpha_exp == 0 {
            return Err(ExplorationError::InvalidConfig("alpha_exp must be >= 1".into()));
        }
        for (name, v) in [
            ("l_r", self.l_r),
            ("l_s", self.l_s),
            ("frontier_offset", self.frontier_offset),
            ("reach_radius", self.reach_radius),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ExplorationError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Corner offsets of the stubborn square, in visiting order.
const CORNERS: [(f64, f64); 4] = [(1.0, 1.0), (1.0, -1.0), (-1.0, -1.0), (-1.0, 1.0)];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExplorationState {
    pub goal: Option<Point>,
    pub steps_toward_goal: usize,
    /// Next stubborn corner, 0..4.
    pub corner_index: usize,
    /// Center of the current stubborn square.
    pub anchor: Option<Point>,
}

/// Proposes a new exploration goal and resets the goal step counter.
pub fn propose<R: Rng + ?Sized>(
    cfg: &ExplorationConfig,
    maps: &Maps,
    pose: Point,
    state: &mut ExplorationState,
    rng: &mut R,
) -> Result<Point, ExplorationError> {
    let goal = match cfg.strategy {
        Strategy::Uniform | Strategy::UniformNoFailsafe => uniform_goal(cfg.l_r, maps, pose, rng),
        Strategy::Stubborn => {
            if state.corner_index == 0 || state.anchor.is_none() {
                state.anchor = Some(pose);
            }
            let a = state.anchor.expect("anchor set above");
            let (sx, sy) = CORNERS[state.corner_index];
            state.corner_index = (state.corner_index + 1) % CORNERS.len();
            let h = cfg.l_s / 2.0;
            Point::new(a.x + sx * h, a.y + sy * h)
        }
        Strategy::Frontier => frontier_goal(cfg.frontier_offset, maps, pose)?,
    };
    state.goal = Some(goal);
    state.steps_toward_goal = 0;
    Ok(goal)
}

/// Point uniform over the `l_r` square centered on `pose`, clipped to the
/// map extent (the bounding box of known cells). Reachability is not
/// checked.
pub fn uniform_goal<R: Rng + ?Sized>(l_r: f64, maps: &Maps, pose: Point, rng: &mut R) -> Point {
    let (lo, hi) = known_extent(maps);
    let h = l_r / 2.0;
    let x0 = (pose.x - h).max(lo.x);
    let x1 = (pose.x + h).min(hi.x);
    let y0 = (pose.y - h).max(lo.y);
    let y1 = (pose.y + h).min(hi.y);
    let x = if x1 > x0 { rng.random_range(x0..x1) } else { pose.x };
    let y = if y1 > y0 { rng.random_range(y0..y1) } else { pose.y };
    Point::new(x, y)
}

/// Corners of the bounding box of non-unknown cells; the whole grid when
/// nothing is known yet.
pub fn known_extent(maps: &Maps) -> (Point, Point) {
    let spec = maps.spec();
    let mut bounds: Option<(usize, usize, usize, usize)> = None;
    for (idx, &s) in maps.occupancy.cells.iter() {
        if s == CellState::Unknown {
            continue;
        }
        let b = bounds.get_or_insert((idx.row, idx.row, idx.col, idx.col));
        b.0 = b.0.min(idx.row);
        b.1 = b.1.max(idx.row);
        b.2 = b.2.min(idx.col);
        b.3 = b.3.max(idx.col);
    }
    match bounds {
        None => (spec.origin, spec.max_corner()),
        Some((r0, r1, c0, c1)) => {
            let cs = spec.cell_size;
            (
                Point::new(spec.origin.x + c0 as f64 * cs, spec.origin.y + r0 as f64 * cs),
                Point::new(spec.origin.x + (c1 + 1) as f64 * cs, spec.origin.y + (r1 + 1) as f64 * cs),
            )
        }
    }
}

/// Free cells with at least one unknown (or off-map) 8-neighbour.
pub fn frontier_cells(maps: &Maps) -> Vec<GridIndex> {
    let cells = &maps.occupancy.cells;
    cells
        .iter()
        .filter(|(idx, &s)| {
            s == CellState::Free
                && NEIGHBORS8.iter().any(|&(dr, dc)| {
                    cells.offset(*idx, dr, dc).is_none_or(|n| cells[n] == CellState::Unknown)
                })
        })
        .map(|(i, _)| i)
        .collect()
}

/// Nearest frontier cell by geodesic distance over known free space
/// (Euclidean when none is connected to the agent), pushed `offset` further
/// along the agent-to-frontier direction.
pub fn frontier_goal(offset: f64, maps: &Maps, pose: Point) -> Result<Point, ExplorationError> {
    let frontier = frontier_cells(maps);
    if frontier.is_empty() {
        return Err(ExplorationError::NoFrontier);
    }
    let spec = maps.spec();
    let free = maps.occupancy.cells.map(|&s| s == CellState::Free);
    let agent = spec.world_to_grid(pose).ok();
    let field = agent.filter(|&a| free[a]).map(|a| distance_field(&free, spec.cell_size, a));
    let pick_min = |key: &dyn Fn(GridIndex) -> f64| {
        frontier
            .iter()
            .copied()
            .map(|c| (key(c), c))
            .filter(|(d, _)| d.is_finite())
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, c)| c)
    };
    let geodesic = field.as_ref().and_then(|f| pick_min(&|c| f[c]));
    let cell = geodesic
        .or_else(|| pick_min(&|c| spec.cell_center(c).distance(pose)))
        .ok_or(ExplorationError::NoFrontier)?;
    let center = spec.cell_center(cell);
    let d = center.sub(pose);
    let n = d.norm();
    if n < 1e-9 {
        return Ok(center);
    }
    Ok(center.add(d.scale(offset / n)))
}

/// Advances the goal step counter. Returns true when a new goal should be
/// proposed.
pub fn tick(state: &mut ExplorationState, reached: bool, cfg: &ExplorationConfig) -> bool {
    state.steps_toward_goal += 1;
    reached || (cfg.strategy.has_failsafe() && state.steps_toward_goal >= cfg.alpha_exp)
}
