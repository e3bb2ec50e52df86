//! Shared continuous and discrete geometry: poses, grid indexing, supercover
//! raycasting and 8-connected grid geodesics.
//!
//! Grid convention: `col` runs along world x, `row` along world y. Cell
//! `(row, col)` covers `[origin.x + col*cs, origin.x + (col+1)*cs) x
//! [origin.y + row*cs, origin.y + (row+1)*cs)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::{PI, SQRT_2, TAU};
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance (in cell units) under which a segment is considered to touch a
/// cell boundary.
const TOUCH_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point ({x:.3}, {y:.3}) lies outside the grid extent")]
    OutOfBounds { x: f64, y: f64 },
    #[error("invalid grid spec: {0}")]
    InvalidGridSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn add(self, other: Point) -> Point {
        Point::new(self.x + other.x, self.y + other.y)
    }

    pub fn sub(self, other: Point) -> Point {
        Point::new(self.x - other.x, self.y - other.y)
    }

    pub fn scale(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }

    /// Unit vector at `angle` radians from the +x axis.
    pub fn from_angle(angle: f64) -> Point {
        Point::new(angle.cos(), angle.sin())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Planar pose. `heading` is kept in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: normalize_angle(heading),
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn direction(&self) -> Point {
        Point::from_angle(self.heading)
    }

    pub fn turned(&self, delta: f64) -> Pose {
        Pose::new(self.x, self.y, self.heading + delta)
    }

    pub fn advanced(&self, distance: f64) -> Pose {
        let p = self.position().add(self.direction().scale(distance));
        Pose::new(p.x, p.y, self.heading)
    }

    /// Signed angle in `(-π, π]` from the current heading to `target`.
    pub fn bearing_to(&self, target: Point) -> f64 {
        let d = target.sub(self.position());
        wrap_angle(d.y.atan2(d.x) - self.heading)
    }
}

/// Maps any finite angle into `[0, 2π)`.
pub fn normalize_angle(angle: f64) -> f64 {
    let a = angle.rem_euclid(TAU);
    // rem_euclid can return TAU itself for tiny negative inputs.
    if a >= TAU {
        0.0
    } else {
        a
    }
}

/// Maps any finite angle into `(-π, π]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let a = normalize_angle(angle);
    if a > PI {
        a - TAU
    } else {
        a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridIndex {
    pub row: usize,
    pub col: usize,
}

impl GridIndex {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    /// Chebyshev distance in cells.
    pub fn chebyshev(self, other: GridIndex) -> usize {
        self.row.abs_diff(other.row).max(self.col.abs_diff(other.col))
    }

    pub fn is_adjacent8(self, other: GridIndex) -> bool {
        self.chebyshev(other) == 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub cell_size: f64,
    pub rows: usize,
    pub cols: usize,
    /// World coordinates of the outer corner of cell (0, 0).
    pub origin: Point,
}

impl GridSpec {
    pub fn new(cell_size: f64, rows: usize, cols: usize, origin: Point) -> Result<Self, GeometryError> {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(GeometryError::InvalidGridSpec(format!("cell_size {cell_size} must be > 0")));
        }
        if rows == 0 || cols == 0 {
            return Err(GeometryError::InvalidGridSpec(format!("empty grid {rows}x{cols}")));
        }
        if !origin.is_finite() {
            return Err(GeometryError::InvalidGridSpec("non-finite origin".into()));
        }
        Ok(Self {
            cell_size,
            rows,
            cols,
            origin,
        })
    }

    pub fn width(&self) -> f64 {
        self.cols as f64 * self.cell_size
    }

    pub fn height(&self) -> f64 {
        self.rows as f64 * self.cell_size
    }

    pub fn max_corner(&self) -> Point {
        Point::new(self.origin.x + self.width(), self.origin.y + self.height())
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_size * self.cell_size
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Closed-extent containment test.
    pub fn contains(&self, p: Point) -> bool {
        let max = self.max_corner();
        p.x >= self.origin.x && p.y >= self.origin.y && p.x <= max.x && p.y <= max.y
    }

    pub fn in_bounds(&self, row: isize, col: isize) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.rows && (col as usize) < self.cols
    }

    /// Continuous grid coordinates `(u, v)` = `(col, row)` in cell units.
    pub fn to_grid_units(&self, p: Point) -> (f64, f64) {
        (
            (p.x - self.origin.x) / self.cell_size,
            (p.y - self.origin.y) / self.cell_size,
        )
    }

    pub fn from_grid_units(&self, u: f64, v: f64) -> Point {
        Point::new(self.origin.x + u * self.cell_size, self.origin.y + v * self.cell_size)
    }

    /// Floor-binning of a point into its containing cell. Points on the max
    /// extent are clamped into the last row/column.
    pub fn world_to_grid(&self, p: Point) -> Result<GridIndex, GeometryError> {
        if !p.is_finite() || !self.contains(p) {
            return Err(GeometryError::OutOfBounds { x: p.x, y: p.y });
        }
        let (u, v) = self.to_grid_units(p);
        let col = (u.floor() as usize).min(self.cols - 1);
        let row = (v.floor() as usize).min(self.rows - 1);
        Ok(GridIndex { row, col })
    }

    pub fn cell_center(&self, idx: GridIndex) -> Point {
        self.from_grid_units(idx.col as f64 + 0.5, idx.row as f64 + 0.5)
    }

    /// Clips the segment `from -> to` to the grid extent (Liang-Barsky).
    /// Returns `None` when the segment misses the grid entirely.
    pub fn clip_segment(&self, from: Point, to: Point) -> Option<(Point, Point)> {
        let max = self.max_corner();
        let d = to.sub(from);
        let mut t0 = 0.0f64;
        let mut t1 = 1.0f64;
        let checks = [
            (-d.x, from.x - self.origin.x),
            (d.x, max.x - from.x),
            (-d.y, from.y - self.origin.y),
            (d.y, max.y - from.y),
        ];
        for (p, q) in checks {
            if p == 0.0 {
                if q < 0.0 {
                    return None;
                }
            } else {
                let r = q / p;
                if p < 0.0 {
                    t0 = t0.max(r);
                } else {
                    t1 = t1.min(r);
                }
            }
        }
        if t0 > t1 {
            return None;
        }
        Some((from.add(d.scale(t0)), from.add(d.scale(t1))))
    }
}

/// Free-function form of [`GridSpec::world_to_grid`].
pub fn world_to_grid(p: Point, spec: &GridSpec) -> Result<GridIndex, GeometryError> {
    spec.world_to_grid(p)
}

/// Dense row-major 2D array.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Grid<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Option<Self> {
        (data.len() == rows * cols).then_some(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(GridIndex) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for row in 0..rows {
            for col in 0..cols {
                data.push(f(GridIndex { row, col }));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn in_bounds(&self, row: isize, col: isize) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.rows && (col as usize) < self.cols
    }

    pub fn contains_index(&self, idx: GridIndex) -> bool {
        idx.row < self.rows && idx.col < self.cols
    }

    pub fn get(&self, idx: GridIndex) -> Option<&T> {
        self.contains_index(idx).then(|| &self.data[idx.row * self.cols + idx.col])
    }

    pub fn get_mut(&mut self, idx: GridIndex) -> Option<&mut T> {
        if self.contains_index(idx) {
            Some(&mut self.data[idx.row * self.cols + idx.col])
        } else {
            None
        }
    }

    pub fn flat_index(&self, idx: GridIndex) -> usize {
        idx.row * self.cols + idx.col
    }

    pub fn index_of(&self, flat: usize) -> GridIndex {
        GridIndex {
            row: flat / self.cols,
            col: flat % self.cols,
        }
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn iter(&self) -> impl Iterator<Item = (GridIndex, &T)> + '_ {
        self.data.iter().enumerate().map(|(i, v)| (self.index_of(i), v))
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn offset(&self, idx: GridIndex, dr: isize, dc: isize) -> Option<GridIndex> {
        let r = idx.row as isize + dr;
        let c = idx.col as isize + dc;
        self.in_bounds(r, c).then(|| GridIndex::new(r as usize, c as usize))
    }
}

impl<T> std::ops::Index<GridIndex> for Grid<T> {
    type Output = T;
    fn index(&self, idx: GridIndex) -> &T {
        assert!(self.contains_index(idx), "grid index {idx:?} out of bounds");
        &self.data[idx.row * self.cols + idx.col]
    }
}

impl<T> std::ops::IndexMut<GridIndex> for Grid<T> {
    fn index_mut(&mut self, idx: GridIndex) -> &mut T {
        assert!(self.contains_index(idx), "grid index {idx:?} out of bounds");
        &mut self.data[idx.row * self.cols + idx.col]
    }
}

impl Grid<bool> {
    pub fn count_true(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

pub const NEIGHBORS8: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// 8-connected moves from `idx` over `free` cells. A diagonal move is only
/// allowed when both orthogonal cells it passes are free (no corner cutting).
pub fn passable_neighbors(free: &Grid<bool>, idx: GridIndex) -> impl Iterator<Item = (GridIndex, bool)> + '_ {
    NEIGHBORS8.iter().filter_map(move |&(dr, dc)| {
        let n = free.offset(idx, dr, dc)?;
        if !free[n] {
            return None;
        }
        let diagonal = dr != 0 && dc != 0;
        if diagonal {
            let a = free.offset(idx, dr, 0)?;
            let b = free.offset(idx, 0, dc)?;
            if !(free[a] && free[b]) {
                return None;
            }
        }
        Some((n, diagonal))
    })
}

/// Visits, in order along the segment, every cell whose closed square
/// touches `from -> to` (supercover). Cells outside the grid are skipped.
/// Stops early when `visit` breaks.
pub fn walk_supercover(spec: &GridSpec, from: Point, to: Point, mut visit: impl FnMut(GridIndex) -> ControlFlow<()>) {
    let (u0, v0) = spec.to_grid_units(from);
    let (u1, v1) = spec.to_grid_units(to);
    let du = u1 - u0;
    let dv = v1 - v0;
    let (umin, umax) = (u0.min(u1), u0.max(u1));
    let (vmin, vmax) = (v0.min(v1), v0.max(v1));
    let c_first = (umin - 1.0 - TOUCH_EPS).ceil() as i64;
    let c_last = (umax + TOUCH_EPS).floor() as i64;
    let ncols = c_last - c_first + 1;
    let vertical = du.abs() < 1e-12;
    for k in 0..ncols {
        let c = if du >= 0.0 { c_first + k } else { c_last - k };
        let (rlo, rhi) = if vertical {
            (vmin, vmax)
        } else {
            let lo = umin.max(c as f64 - TOUCH_EPS);
            let hi = umax.min(c as f64 + 1.0 + TOUCH_EPS);
            let va = v0 + (lo - u0) * dv / du;
            let vb = v0 + (hi - u0) * dv / du;
            (va.min(vb).max(vmin), va.max(vb).min(vmax))
        };
        let r_first = (rlo - 1.0 - TOUCH_EPS).ceil() as i64;
        let r_last = (rhi + TOUCH_EPS).floor() as i64;
        if r_last < r_first {
            continue;
        }
        let nrows = r_last - r_first + 1;
        for j in 0..nrows {
            let r = if dv >= 0.0 { r_first + j } else { r_last - j };
            if !spec.in_bounds(r as isize, c as isize) {
                continue;
            }
            if visit(GridIndex::new(r as usize, c as usize)).is_break() {
                return;
            }
        }
    }
}

/// Ordered supercover cell list of a segment whose endpoints lie in the grid.
pub fn supercover(spec: &GridSpec, from: Point, to: Point) -> Result<Vec<GridIndex>, GeometryError> {
    spec.world_to_grid(from)?;
    spec.world_to_grid(to)?;
    let mut cells = Vec::new();
    walk_supercover(spec, from, to, |c| {
        cells.push(c);
        ControlFlow::Continue(())
    });
    Ok(cells)
}

/// Segment parameter in `[0, 1]` at which `from -> to` first touches the
/// closed square of `cell`, or `None` if it never does.
pub fn segment_entry_param(spec: &GridSpec, cell: GridIndex, from: Point, to: Point) -> Option<f64> {
    let (u0, v0) = spec.to_grid_units(from);
    let (u1, v1) = spec.to_grid_units(to);
    let lo = [cell.col as f64 - TOUCH_EPS, cell.row as f64 - TOUCH_EPS];
    let hi = [cell.col as f64 + 1.0 + TOUCH_EPS, cell.row as f64 + 1.0 + TOUCH_EPS];
    let start = [u0, v0];
    let delta = [u1 - u0, v1 - v0];
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    for axis in 0..2 {
        if delta[axis].abs() < 1e-15 {
            if start[axis] < lo[axis] || start[axis] > hi[axis] {
                return None;
            }
        } else {
            let ta = (lo[axis] - start[axis]) / delta[axis];
            let tb = (hi[axis] - start[axis]) / delta[axis];
            t0 = t0.max(ta.min(tb));
            t1 = t1.min(ta.max(tb));
        }
    }
    (t0 <= t1).then_some(t0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RayHit {
    Clear,
    Blocked(GridIndex),
}

impl RayHit {
    pub fn is_blocked(&self) -> bool {
        matches!(self, RayHit::Blocked(_))
    }
}

/// First obstacle cell of the supercover of `from -> to`, in traversal order.
/// `obstacles[c] == true` marks a blocking cell.
pub fn raycast(obstacles: &Grid<bool>, spec: &GridSpec, from: Point, to: Point) -> Result<RayHit, GeometryError> {
    spec.world_to_grid(from)?;
    spec.world_to_grid(to)?;
    Ok(raycast_unchecked(obstacles, spec, from, to))
}

pub(crate) fn raycast_unchecked(obstacles: &Grid<bool>, spec: &GridSpec, from: Point, to: Point) -> RayHit {
    let mut hit = RayHit::Clear;
    walk_supercover(spec, from, to, |c| {
        if obstacles[c] {
            hit = RayHit::Blocked(c);
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    });
    hit
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry {
    cost: f64,
    flat: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on cost, then on flat index for determinism.
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.flat.cmp(&self.flat))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source 8-connected Dijkstra over `free` cells. Axis steps cost
/// `cell_size`, diagonal steps `cell_size * √2`. Unreachable cells hold
/// `f64::INFINITY`. A blocked source yields an all-infinite field.
pub fn distance_field(free: &Grid<bool>, cell_size: f64, source: GridIndex) -> Grid<f64> {
    let mut dist = Grid::filled(free.rows(), free.cols(), f64::INFINITY);
    if !free.get(source).copied().unwrap_or(false) {
        return dist;
    }
    let diag = cell_size * SQRT_2;
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapEntry {
        cost: 0.0,
        flat: free.flat_index(source),
    });
    while let Some(HeapEntry { cost, flat }) = heap.pop() {
        if cost > dist.as_slice()[flat] {
            continue;
        }
        let idx = free.index_of(flat);
        for (n, diagonal) in passable_neighbors(free, idx) {
            let next = cost + if diagonal { diag } else { cell_size };
            let slot = &mut dist[n];
            if next < *slot {
                *slot = next;
                heap.push(HeapEntry {
                    cost: next,
                    flat: free.flat_index(n),
                });
            }
        }
    }
    dist
}

/// Geodesic distance between the cells containing `a` and `b`, or `None`
/// when no 8-connected path of free cells links them.
pub fn geodesic_distance(free: &Grid<bool>, spec: &GridSpec, a: Point, b: Point) -> Result<Option<f64>, GeometryError> {
    let ia = spec.world_to_grid(a)?;
    let ib = spec.world_to_grid(b)?;
    Ok(geodesic_between_cells(free, spec.cell_size, ia, ib))
}

pub fn geodesic_between_cells(free: &Grid<bool>, cell_size: f64, a: GridIndex, b: GridIndex) -> Option<f64> {
    if !(free[a] && free[b]) {
        return None;
    }
    if a == b {
        return Some(0.0);
    }
    let d = distance_field(free, cell_size, a)[b];
    d.is_finite().then_some(d)
}

/// Free cell nearest (Euclidean in index space, ties row-major) to `target`
/// within a Chebyshev radius of `max_radius` cells.
pub fn nearest_free_cell(free: &Grid<bool>, target: GridIndex, max_radius: usize) -> Option<GridIndex> {
    if free.get(target).copied().unwrap_or(false) {
        return Some(target);
    }
    let r0 = target.row.saturating_sub(max_radius);
    let c0 = target.col.saturating_sub(max_radius);
    let r1 = (target.row + max_radius).min(free.rows().saturating_sub(1));
    let c1 = (target.col + max_radius).min(free.cols().saturating_sub(1));
    let mut best: Option<(usize, GridIndex)> = None;
    for row in r0..=r1 {
        for col in c0..=c1 {
            let idx = GridIndex::new(row, col);
            if !free[idx] {
                continue;
            }
            let dr = row.abs_diff(target.row);
            let dc = col.abs_diff(target.col);
            let d2 = dr * dr + dc * dc;
            // Row-major scan keeps the first of equal candidates.
            if best.is_none_or(|(bd, _)| d2 < bd) {
                best = Some((d2, idx));
            }
        }
    }
    best.map(|(_, idx)| idx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(rows: usize, cols: usize, cs: f64) -> GridSpec {
        GridSpec::new(cs, rows, cols, Point::new(0.0, 0.0)).unwrap()
    }

    #[test]
    fn world_to_grid_examples() {
        let s = spec(25, 25, 0.2);
        assert_eq!(s.world_to_grid(Point::new(0.0, 0.0)).unwrap(), GridIndex::new(0, 0));
        assert_eq!(s.world_to_grid(Point::new(0.45, 0.21)).unwrap(), GridIndex::new(1, 2));
        assert!(matches!(
            s.world_to_grid(Point::new(10.0, 10.0)),
            Err(GeometryError::OutOfBounds { .. })
        ));
        // Exact max extent clamps into the last cell.
        assert_eq!(s.world_to_grid(Point::new(5.0, 5.0)).unwrap(), GridIndex::new(24, 24));
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(GridSpec::new(0.0, 3, 3, Point::new(0.0, 0.0)).is_err());
        assert!(GridSpec::new(0.2, 0, 3, Point::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn cell_centers_round_trip() {
        let s = GridSpec::new(0.2, 17, 23, Point::new(-3.1, 4.7)).unwrap();
        for row in 0..s.rows {
            for col in 0..s.cols {
                let idx = GridIndex::new(row, col);
                assert_eq!(s.world_to_grid(s.cell_center(idx)).unwrap(), idx);
            }
        }
    }

    #[test]
    fn angles_normalize() {
        assert!((normalize_angle(-PI / 2.0) - 1.5 * PI).abs() < 1e-12);
        assert_eq!(normalize_angle(TAU), 0.0);
        assert!((wrap_angle(1.5 * PI) + PI / 2.0).abs() < 1e-12);
        let p = Pose::new(0.0, 0.0, 7.0 * PI);
        assert!(p.heading >= 0.0 && p.heading < TAU);
    }

    #[test]
    fn raycast_empty_and_wall() {
        let s = spec(10, 10, 1.0);
        let mut obs = Grid::filled(10, 10, false);
        let a = Point::new(0.5, 5.5);
        let b = Point::new(9.5, 5.5);
        assert_eq!(raycast(&obs, &s, a, b).unwrap(), RayHit::Clear);
        obs[GridIndex::new(5, 4)] = true;
        assert_eq!(raycast(&obs, &s, a, b).unwrap(), RayHit::Blocked(GridIndex::new(5, 4)));
        assert_eq!(raycast(&obs, &s, b, a).unwrap(), RayHit::Blocked(GridIndex::new(5, 4)));
    }

    #[test]
    fn diagonal_corner_pair_blocks() {
        let s = spec(4, 4, 1.0);
        let mut obs = Grid::filled(4, 4, false);
        obs[GridIndex::new(0, 1)] = true;
        obs[GridIndex::new(1, 0)] = true;
        let hit = raycast(&obs, &s, Point::new(0.5, 0.5), Point::new(2.5, 2.5)).unwrap();
        assert!(hit.is_blocked());
        let cells = supercover(&s, Point::new(0.5, 0.5), Point::new(2.5, 2.5)).unwrap();
        for expected in [(0, 0), (0, 1), (1, 0), (1, 1), (1, 2), (2, 1), (2, 2)] {
            assert!(cells.contains(&GridIndex::new(expected.0, expected.1)), "{expected:?}");
        }
        assert_eq!(cells.len(), 7);
    }

    #[test]
    fn supercover_is_ordered_along_segment() {
        let s = spec(20, 20, 0.2);
        let a = Point::new(0.13, 0.37);
        let b = Point::new(3.71, 2.09);
        let cells = supercover(&s, a, b).unwrap();
        let ts: Vec<f64> = cells.iter().map(|&c| segment_entry_param(&s, c, a, b).unwrap()).collect();
        assert!(ts.windows(2).all(|w| w[0] <= w[1] + 1e-12), "{ts:?}");
        assert_eq!(cells.first(), Some(&s.world_to_grid(a).unwrap()));
        assert_eq!(cells.last(), Some(&s.world_to_grid(b).unwrap()));
    }

    #[test]
    fn geodesic_examples() {
        let s = spec(3, 12, 0.2);
        let free = Grid::filled(3, 12, true);
        let a = s.cell_center(GridIndex::new(1, 0));
        let b = s.cell_center(GridIndex::new(1, 10));
        assert_eq!(geodesic_distance(&free, &s, a, a).unwrap(), Some(0.0));
        let d = geodesic_distance(&free, &s, a, b).unwrap().unwrap();
        assert!((d - 2.0).abs() <= 0.2 + 1e-9, "{d}");

        let mut split = Grid::filled(3, 12, true);
        for row in 0..3 {
            split[GridIndex::new(row, 5)] = false;
        }
        assert_eq!(geodesic_distance(&split, &s, a, b).unwrap(), None);
    }

    #[test]
    fn no_corner_cutting() {
        let mut free = Grid::filled(2, 2, true);
        free[GridIndex::new(0, 1)] = false;
        free[GridIndex::new(1, 0)] = false;
        assert_eq!(geodesic_between_cells(&free, 1.0, GridIndex::new(0, 0), GridIndex::new(1, 1)), None);
    }

    #[test]
    fn nearest_free_prefers_euclidean() {
        let mut free = Grid::filled(9, 9, false);
        free[GridIndex::new(6, 6)] = true; // chebyshev 2, d2 = 8
        free[GridIndex::new(4, 7)] = true; // chebyshev 3, d2 = 9
        free[GridIndex::new(4, 6)] = true; // chebyshev 2, d2 = 4
        assert_eq!(nearest_free_cell(&free, GridIndex::new(4, 4), 5), Some(GridIndex::new(4, 6)));
        assert_eq!(nearest_free_cell(&free, GridIndex::new(0, 0), 2), None);
    }

    #[test]
    fn clip_segment_to_extent() {
        let s = spec(10, 10, 1.0);
        let (a, b) = s.clip_segment(Point::new(5.0, 5.0), Point::new(15.0, 5.0)).unwrap();
        assert_eq!(a, Point::new(5.0, 5.0));
        assert!((b.x - 10.0).abs() < 1e-12);
        assert!(s.clip_segment(Point::new(-5.0, -5.0), Point::new(-1.0, -1.0)).is_none());
    }
}
