//! Egocentric top-down maps built from observations.
//!
//! All maps live in the episode frame (origin at the start position). The
//! initial extent is centered on the start with the start at a cell center,
//! and grows in whole blocks when a projection falls outside.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::export::{write_pgm, write_ppm};
use crate::geometry::{walk_supercover, Grid, GridIndex, GridSpec, Point, Pose};
use crate::perception::Detection;
use crate::world::{ObjectCategory, Observation, NUM_CATEGORIES};

pub const MAP_CELL_SIZE: f64 = 0.2;
/// Cells on each side of the start cell in a fresh map.
pub const INITIAL_HALF_CELLS: usize = 30;
/// Rows or columns added per growth step.
pub const GROW_BLOCK: usize = 20;
/// Hit points are pushed this far along the ray so they land inside the
/// obstacle cell rather than on its face.
const HIT_NUDGE: f64 = 0.01;
/// Free-space marking stops this short of the measured range.
const FREE_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellState {
    #[default]
    Unknown,
    Free,
    Obstacle,
    Collision,
}

impl CellState {
    pub fn is_blocking(self) -> bool {
        matches!(self, CellState::Obstacle | CellState::Collision)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMap {
    pub spec: GridSpec,
    pub cells: Grid<CellState>,
    explored: usize,
}

impl OccupancyMap {
    fn new(spec: GridSpec) -> Self {
        Self {
            spec,
            cells: Grid::filled(spec.rows, spec.cols, CellState::Unknown),
            explored: 0,
        }
    }

    pub fn state(&self, idx: GridIndex) -> CellState {
        self.cells[idx]
    }

    /// Cells with any state other than unknown.
    pub fn explored_count(&self) -> usize {
        self.explored
    }

    pub fn explored_mask(&self) -> Grid<bool> {
        self.cells.map(|&c| c != CellState::Unknown)
    }

    fn set(&mut self, idx: GridIndex, state: CellState) {
        let cell = &mut self.cells[idx];
        if *cell == CellState::Unknown && state != CellState::Unknown {
            self.explored += 1;
        }
        *cell = state;
    }

    fn mark_free(&mut self, idx: GridIndex) {
        if self.cells[idx] == CellState::Unknown {
            self.set(idx, CellState::Free);
        }
    }

    fn mark_obstacle(&mut self, idx: GridIndex) {
        if self.cells[idx] != CellState::Collision {
            self.set(idx, CellState::Obstacle);
        }
    }

    /// Grayscale image: unknown mid gray, free white, obstacle black,
    /// collision dark gray.
    pub fn to_pgm(&self) -> Vec<u8> {
        write_pgm(&self.cells.map(|c| match c {
            CellState::Unknown => 128,
            CellState::Free => 255,
            CellState::Obstacle => 0,
            CellState::Collision => 64,
        }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticMap {
    pub spec: GridSpec,
    pub labels: Grid<Option<ObjectCategory>>,
    labeled: usize,
    per_category: [usize; NUM_CATEGORIES],
}

impl SemanticMap {
    fn new(spec: GridSpec) -> Self {
        Self {
            spec,
            labels: Grid::filled(spec.rows, spec.cols, None),
            labeled: 0,
            per_category: [0; NUM_CATEGORIES],
        }
    }

    pub fn label(&self, idx: GridIndex) -> Option<ObjectCategory> {
        self.labels[idx]
    }

    pub fn labeled_count(&self) -> usize {
        self.labeled
    }

    pub fn contains_category(&self, category: ObjectCategory) -> bool {
        self.per_category[category.index()] > 0
    }

    fn set(&mut self, idx: GridIndex, category: ObjectCategory) {
        match self.labels[idx] {
            None => self.labeled += 1,
            Some(old) => self.per_category[old.index()] -= 1,
        }
        self.per_category[category.index()] += 1;
        self.labels[idx] = Some(category);
    }
}

/// Cells currently labeled `category`, in row-major order.
pub fn query_goal_cells(sem: &SemanticMap, category: ObjectCategory) -> Vec<GridIndex> {
    sem.labels
        .iter()
        .filter(|(_, &l)| l == Some(category))
        .map(|(i, _)| i)
        .collect()
}

/// Occupancy and semantic layers over one shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Maps {
    pub occupancy: OccupancyMap,
    pub semantic: SemanticMap,
}

impl Default for Maps {
    fn default() -> Self {
        Self::new()
    }
}

impl Maps {
    pub fn new() -> Self {
        let n = 2 * INITIAL_HALF_CELLS + 1;
        let half = (INITIAL_HALF_CELLS as f64 + 0.5) * MAP_CELL_SIZE;
        let spec = GridSpec::new(MAP_CELL_SIZE, n, n, Point::new(-half, -half)).expect("valid initial map spec");
        Self {
            occupancy: OccupancyMap::new(spec),
            semantic: SemanticMap::new(spec),
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.occupancy.spec
    }

    /// Grows the grid until `p` lies strictly inside it. Existing cells keep
    /// their world position.
    pub fn ensure_contains(&mut self, p: Point) {
        let spec = *self.spec();
        let (u, v) = spec.to_grid_units(p);
        let block = GROW_BLOCK as f64;
        let need = |below: f64, above: f64| -> (usize, usize) {
            let lo = if below < 0.0 { (-below / block).ceil() as usize * GROW_BLOCK } else { 0 };
            let hi = if above >= 0.0 { ((above + 1.0) / block).ceil() as usize * GROW_BLOCK } else { 0 };
            (lo, hi)
        };
        let (left, right) = need(u, u - spec.cols as f64);
        let (bottom, top) = need(v, v - spec.rows as f64);
        if left + right + bottom + top == 0 {
            return;
        }
        let rows = spec.rows + bottom + top;
        let cols = spec.cols + left + right;
        let origin = Point::new(
            spec.origin.x - left as f64 * spec.cell_size,
            spec.origin.y - bottom as f64 * spec.cell_size,
        );
        let new_spec = GridSpec::new(spec.cell_size, rows, cols, origin).expect("grown spec is valid");
        let shift = |idx: GridIndex| -> Option<GridIndex> {
            let (r, c) = (idx.row.checked_sub(bottom)?, idx.col.checked_sub(left)?);
            (r < spec.rows && c < spec.cols).then(|| GridIndex::new(r, c))
        };
        self.occupancy.cells = Grid::from_fn(rows, cols, |i| shift(i).map_or(CellState::Unknown, |o| self.occupancy.cells[o]));
        self.occupancy.spec = new_spec;
        self.semantic.labels = Grid::from_fn(rows, cols, |i| shift(i).and_then(|o| self.semantic.labels[o]));
        self.semantic.spec = new_spec;
    }

    fn cell_of(&mut self, p: Point) -> GridIndex {
        self.ensure_contains(p);
        self.spec().world_to_grid(p).expect("point inside after growth")
    }

    /// Folds one observation and its detections into the maps. The pose is
    /// the observation pose in the episode frame.
    pub fn integrate(&mut self, obs: &Observation, detections: &[Detection]) {
        let pose = obs.pose;
        let from = pose.position();
        self.ensure_contains(from);
        for ray in &obs.depth {
            let dir = Point::from_angle(pose.heading + ray.bearing);
            let free_end = from.add(dir.scale((ray.range - FREE_MARGIN).max(0.0)));
            self.ensure_contains(free_end);
            let spec = *self.spec();
            let occ = &mut self.occupancy;
            walk_supercover(&spec, from, free_end, |c| {
                occ.mark_free(c);
                ControlFlow::Continue(())
            });
            if ray.hit {
                let idx = self.cell_of(from.add(dir.scale(ray.range + HIT_NUDGE)));
                self.occupancy.mark_obstacle(idx);
            }
        }
        for d in detections {
            let p = from.add(Point::from_angle(pose.heading + d.bearing).scale(d.range));
            let idx = self.cell_of(p);
            self.semantic.set(idx, d.category);
        }
    }

    /// Marks the cell `distance` ahead of the agent as a collision. Such
    /// cells are never cleared by later observations.
    pub fn record_collision(&mut self, pose: &Pose, distance: f64) -> GridIndex {
        let idx = self.cell_of(pose.advanced(distance).position());
        self.occupancy.set(idx, CellState::Collision);
        idx
    }

    /// Occupancy image with semantic labels painted in their colors.
    pub fn to_ppm(&self) -> Vec<u8> {
        let img = Grid::from_fn(self.spec().rows, self.spec().cols, |i| match self.semantic.labels[i] {
            Some(c) => c.rgb(),
            None => {
                let g = match self.occupancy.cells[i] {
                    CellState::Unknown => 128,
                    CellState::Free => 255,
                    CellState::Obstacle => 0,
                    CellState::Collision => 64,
                };
                [g, g, g]
            }
        });
        write_ppm(&img)
    }
}

/// Planning mask (true = traversable): every cell within Chebyshev
/// `radius` of an obstacle or collision cell is blocked. Unknown cells stay
/// traversable.
pub fn dilate_obstacles(occ: &OccupancyMap, radius: usize) -> Grid<bool> {
    dilate_mask(&occ.cells.map(|s| s.is_blocking()), radius)
}

/// Free mask of `blocked` inflated by a Chebyshev radius.
pub fn dilate_mask(blocked: &Grid<bool>, radius: usize) -> Grid<bool> {
    let rows = blocked.rows();
    let cols = blocked.cols();
    let mut free = Grid::filled(rows, cols, true);
    for (idx, &b) in blocked.iter() {
        if !b {
            continue;
        }
        let r0 = idx.row.saturating_sub(radius);
        let c0 = idx.col.saturating_sub(radius);
        let r1 = (idx.row + radius).min(rows - 1);
        let c1 = (idx.col + radius).min(cols - 1);
        for r in r0..=r1 {
            for c in c0..=c1 {
                free[GridIndex::new(r, c)] = false;
            }
        }
    }
    free
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(category: ObjectCategory, range: f64, bearing: f64) -> Detection {
        Detection {
            category,
            confidence: 1.0,
            range,
            bearing,
        }
    }

    fn obs(pose: Pose) -> Observation {
        Observation {
            pose,
            current_goal: None,
            visible_objects: vec![],
            depth: vec![],
        }
    }

    #[test]
    fn start_is_a_cell_center() {
        let m = Maps::new();
        let idx = m.spec().world_to_grid(Point::new(0.0, 0.0)).unwrap();
        let c = m.spec().cell_center(idx);
        assert!(c.norm() < 1e-12);
    }

    #[test]
    fn projection_dead_ahead() {
        let mut m = Maps::new();
        m.integrate(&obs(Pose::new(0.0, 0.0, 0.0)), &[det(ObjectCategory::Red, 1.0, 0.0)]);
        let idx = m.spec().world_to_grid(Point::new(1.0, 0.0)).unwrap();
        assert_eq!(m.semantic.label(idx), Some(ObjectCategory::Red));
        assert_eq!(query_goal_cells(&m.semantic, ObjectCategory::Red), vec![idx]);
    }

    #[test]
    fn later_label_wins_and_labels_persist() {
        let mut m = Maps::new();
        let o = obs(Pose::new(0.0, 0.0, 0.0));
        m.integrate(&o, &[det(ObjectCategory::Red, 1.0, 0.0)]);
        m.integrate(&o, &[det(ObjectCategory::Blue, 1.0, 0.0)]);
        m.integrate(&o, &[]);
        let idx = m.spec().world_to_grid(Point::new(1.0, 0.0)).unwrap();
        assert_eq!(m.semantic.label(idx), Some(ObjectCategory::Blue));
        assert_eq!(m.semantic.labeled_count(), 1);
    }

    #[test]
    fn collision_cell_ahead_idempotent_and_sticky() {
        let mut m = Maps::new();
        let pose = Pose::new(1.0, 1.0, 0.0);
        let a = m.record_collision(&pose, 0.25);
        let b = m.record_collision(&pose, 0.25);
        assert_eq!(a, b);
        assert_eq!(a, m.spec().world_to_grid(Point::new(1.25, 1.0)).unwrap());
        assert_eq!(m.occupancy.explored_count(), 1);
        let mut o = obs(Pose::new(0.0, 1.0, 0.0));
        o.depth = vec![crate::world::DepthRay {
            bearing: 0.0,
            range: 3.0,
            hit: false,
        }];
        m.integrate(&o, &[]);
        assert_eq!(m.occupancy.state(a), CellState::Collision);
    }

    #[test]
    fn growth_preserves_cells() {
        let mut m = Maps::new();
        m.integrate(&obs(Pose::new(0.0, 0.0, 0.0)), &[det(ObjectCategory::Green, 1.0, 0.0)]);
        m.integrate(&obs(Pose::new(0.0, 0.0, 0.0)), &[det(ObjectCategory::Pink, 20.0, 2.0)]);
        assert!(m.spec().rows > 2 * INITIAL_HALF_CELLS + 1);
        let g = m.spec().world_to_grid(Point::new(1.0, 0.0)).unwrap();
        assert_eq!(m.semantic.label(g), Some(ObjectCategory::Green));
        let p = Point::from_angle(2.0).scale(20.0);
        let q = m.spec().world_to_grid(p).unwrap();
        assert_eq!(m.semantic.label(q), Some(ObjectCategory::Pink));
        assert!(m.spec().cell_center(m.spec().world_to_grid(Point::new(0.0, 0.0)).unwrap()).norm() < 1e-9);
    }

    #[test]
    fn depth_ray_marks_free_then_obstacle() {
        let mut m = Maps::new();
        let mut o = obs(Pose::new(0.0, 0.0, 0.0));
        o.depth = vec![crate::world::DepthRay {
            bearing: 0.0,
            range: 0.9,
            hit: true,
        }];
        m.integrate(&o, &[]);
        let at = |x: f64| m.occupancy.state(m.spec().world_to_grid(Point::new(x, 0.0)).unwrap());
        assert_eq!(at(0.0), CellState::Free);
        assert_eq!(at(0.75), CellState::Free);
        assert_eq!(at(0.95), CellState::Obstacle);
        assert_eq!(at(1.2), CellState::Unknown);
    }

    #[test]
    fn dilation_examples() {
        let mut m = Maps::new();
        let c = GridIndex::new(10, 10);
        m.occupancy.set(c, CellState::Obstacle);
        let id = dilate_obstacles(&m.occupancy, 0);
        assert_eq!(id.count_true(), id.len() - 1);
        let d = dilate_obstacles(&m.occupancy, 1);
        assert_eq!(d.len() - d.count_true(), 9);
        for r in 9..=11 {
            for col in 9..=11 {
                assert!(!d[GridIndex::new(r, col)]);
            }
        }
    }
}
