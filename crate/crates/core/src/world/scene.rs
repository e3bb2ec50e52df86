use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{WorldError, SCHEMA_VERSION};
use crate::export::{mask_rows, write_pgm};
use crate::geometry::{Grid, GridIndex, GridSpec, Point};

/// Default agent clearance baked into [`Scene::navigable`].
pub const DEFAULT_CLEARANCE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneGenConfig {
    pub width_m: f64,
    pub height_m: f64,
    pub cell_size: f64,
    /// Smallest room side produced by a split.
    pub min_room_m: f64,
    pub corridor_width_m: f64,
    pub door_width_m: f64,
    /// Chance that a split becomes a corridor instead of a single wall.
    pub corridor_probability: f64,
    /// Up to this many rectangular clutter blocks per room.
    pub max_clutter_per_room: usize,
    pub max_retries: usize,
}

impl Default for SceneGenConfig {
    fn default() -> Self {
        Self {
            width_m: 10.0,
            height_m: 8.0,
            cell_size: 0.2,
            min_room_m: 2.4,
            corridor_width_m: 1.0,
            door_width_m: 0.8,
            corridor_probability: 0.3,
            max_clutter_per_room: 2,
            max_retries: 20,
        }
    }
}

impl SceneGenConfig {
    fn validate(&self) -> Result<(), WorldError> {
        let bad = |m: &str| Err(WorldError::InvalidConfig(m.to_string()));
        if !(self.width_m >= 5.0 && self.height_m >= 5.0) {
            return bad("scene dimensions must be at least 5 m");
        }
        if !(self.cell_size > 0.0) {
            return bad("cell_size must be positive");
        }
        if !(self.min_room_m > 0.0 && self.corridor_width_m > 0.0 && self.door_width_m > 0.0) {
            return bad("room, corridor and door sizes must be positive");
        }
        if !(0.0..=1.0).contains(&self.corridor_probability) {
            return bad("corridor_probability must lie in [0, 1]");
        }
        Ok(())
    }

    fn cells(&self, meters: f64) -> usize {
        (meters / self.cell_size).round().max(1.0) as usize
    }
}

/// Static 2D world. `obstacles` and `navigable` share `spec`; `navigable`
/// holds the free cells a disc of [`DEFAULT_CLEARANCE`] can stand on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub schema_version: u32,
    pub id: String,
    pub seed: u64,
    pub spec: GridSpec,
    #[serde(with = "mask_rows")]
    pub obstacles: Grid<bool>,
    #[serde(with = "mask_rows")]
    pub navigable: Grid<bool>,
    /// Navigable floor area in square meters.
    pub area: f64,
}

impl Scene {
    pub fn from_obstacles(id: impl Into<String>, seed: u64, spec: GridSpec, obstacles: Grid<bool>) -> Self {
        let mut scene = Self {
            schema_version: SCHEMA_VERSION,
            id: id.into(),
            seed,
            spec,
            navigable: Grid::filled(spec.rows, spec.cols, false),
            obstacles,
            area: 0.0,
        };
        scene.navigable = scene.navigable_for(DEFAULT_CLEARANCE);
        scene.area = scene.navigable.count_true() as f64 * spec.cell_area();
        scene
    }

    /// Free cells whose center keeps at least `radius` from every obstacle
    /// square and from the grid border.
    pub fn navigable_for(&self, radius: f64) -> Grid<bool> {
        Grid::from_fn(self.spec.rows, self.spec.cols, |idx| {
            !self.obstacles[idx] && !self.disc_collides(self.spec.cell_center(idx), radius)
        })
    }

    pub fn is_obstacle(&self, row: isize, col: isize) -> bool {
        !self.spec.in_bounds(row, col) || self.obstacles[GridIndex::new(row as usize, col as usize)]
    }

    /// True when a disc of `radius` at `p` overlaps an obstacle square
    /// (touching does not count) or leaves the grid.
    pub fn disc_collides(&self, p: Point, radius: f64) -> bool {
        self.sweep_collides(p, p, radius)
    }

    /// True when the disc swept from `a` to `b` overlaps an obstacle.
    pub fn sweep_collides(&self, a: Point, b: Point, radius: f64) -> bool {
        let s = &self.spec;
        let max = s.max_corner();
        for p in [a, b] {
            if p.x - radius < s.origin.x || p.y - radius < s.origin.y || p.x + radius > max.x || p.y + radius > max.y {
                return true;
            }
        }
        let (ua, va) = s.to_grid_units(a);
        let (ub, vb) = s.to_grid_units(b);
        let r = radius / s.cell_size;
        let c0 = (ua.min(ub) - r).floor() as isize;
        let c1 = (ua.max(ub) + r).floor() as isize;
        let r0 = (va.min(vb) - r).floor() as isize;
        let r1 = (va.max(vb) + r).floor() as isize;
        for row in r0..=r1 {
            for col in c0..=c1 {
                if !self.is_obstacle(row, col) {
                    continue;
                }
                let lo = (col as f64, row as f64);
                let hi = (col as f64 + 1.0, row as f64 + 1.0);
                if segment_box_distance((ua, va), (ub, vb), lo, hi) < r {
                    return true;
                }
            }
        }
        false
    }

    /// Obstacle mask as a PGM image: obstacles black, free space white.
    pub fn obstacles_pgm(&self) -> Vec<u8> {
        write_pgm(&self.obstacles.map(|&b| if b { 0 } else { 255 }))
    }

    pub fn to_json(&self) -> Result<String, WorldError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, WorldError> {
        let scene: Scene = serde_json::from_str(text)?;
        if scene.schema_version != SCHEMA_VERSION {
            return Err(WorldError::SchemaVersion(scene.schema_version));
        }
        Ok(scene)
    }

    /// Number of 4-connected components of the navigable mask.
    pub fn navigable_components(&self) -> usize {
        count_components(&self.navigable)
    }
}

fn point_box_distance(p: (f64, f64), lo: (f64, f64), hi: (f64, f64)) -> f64 {
    let dx = (lo.0 - p.0).max(0.0).max(p.0 - hi.0);
    let dy = (lo.1 - p.1).max(0.0).max(p.1 - hi.1);
    dx.hypot(dy)
}

fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let d = (b.0 - a.0, b.1 - a.1);
    let len2 = d.0 * d.0 + d.1 * d.1;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * d.0 + (p.1 - a.1) * d.1) / len2).clamp(0.0, 1.0)
    };
    (p.0 - a.0 - t * d.0).hypot(p.1 - a.1 - t * d.1)
}

fn segment_hits_box(a: (f64, f64), b: (f64, f64), lo: (f64, f64), hi: (f64, f64)) -> bool {
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    for (s, d, l, h) in [(a.0, b.0 - a.0, lo.0, hi.0), (a.1, b.1 - a.1, lo.1, hi.1)] {
        if d == 0.0 {
            if s < l || s > h {
                return false;
            }
        } else {
            let ta = (l - s) / d;
            let tb = (h - s) / d;
            t0 = t0.max(ta.min(tb));
            t1 = t1.min(ta.max(tb));
        }
    }
    t0 <= t1
}

/// Exact distance between a segment and an axis-aligned box (0 when they
/// intersect). For disjoint convex sets the minimum is attained at a vertex
/// of one of them.
fn segment_box_distance(a: (f64, f64), b: (f64, f64), lo: (f64, f64), hi: (f64, f64)) -> f64 {
    if segment_hits_box(a, b, lo, hi) {
        return 0.0;
    }
    let mut best = point_box_distance(a, lo, hi).min(point_box_distance(b, lo, hi));
    for corner in [(lo.0, lo.1), (hi.0, lo.1), (lo.0, hi.1), (hi.0, hi.1)] {
        best = best.min(point_segment_distance(corner, a, b));
    }
    best
}

pub(crate) fn count_components(free: &Grid<bool>) -> usize {
    let mut seen = Grid::filled(free.rows(), free.cols(), false);
    let mut components = 0;
    let mut queue = VecDeque::new();
    for (idx, &f) in free.iter() {
        if !f || seen[idx] {
            continue;
        }
        components += 1;
        seen[idx] = true;
        queue.push_back(idx);
        while let Some(cur) = queue.pop_front() {
            for (dr, dc) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
                if let Some(n) = free.offset(cur, dr, dc) {
                    if free[n] && !seen[n] {
                        seen[n] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
    }
    components
}

/// Inclusive interior bounds of a room or corridor, in cells.
#[derive(Debug, Clone, Copy)]
struct Region {
    r0: usize,
    c0: usize,
    r1: usize,
    c1: usize,
}

impl Region {
    fn height(&self) -> usize {
        self.r1 + 1 - self.r0
    }
    fn width(&self) -> usize {
        self.c1 + 1 - self.c0
    }
}

struct Layout<'a> {
    cfg: &'a SceneGenConfig,
    rng: &'a mut ChaCha8Rng,
    obstacles: Grid<bool>,
    doors: Vec<GridIndex>,
    rooms: Vec<Region>,
    min_room: usize,
    corridor: usize,
    door: usize,
}

impl Layout<'_> {
    fn wall_vertical(&mut self, col: usize, region: Region) {
        for row in region.r0..=region.r1 {
            self.obstacles[GridIndex::new(row, col)] = true;
        }
        let span = region.height().saturating_sub(self.door);
        let start = region.r0 + self.rng.random_range(0..=span);
        for row in start..(start + self.door).min(region.r1 + 1) {
            let idx = GridIndex::new(row, col);
            self.obstacles[idx] = false;
            self.doors.push(idx);
        }
    }

    fn wall_horizontal(&mut self, row: usize, region: Region) {
        for col in region.c0..=region.c1 {
            self.obstacles[GridIndex::new(row, col)] = true;
        }
        let span = region.width().saturating_sub(self.door);
        let start = region.c0 + self.rng.random_range(0..=span);
        for col in start..(start + self.door).min(region.c1 + 1) {
            let idx = GridIndex::new(row, col);
            self.obstacles[idx] = false;
            self.doors.push(idx);
        }
    }

    /// A wall across `region` at `pos` (column if `vertical`) must not land
    /// on or beside a door in the walls it abuts.
    fn clashes_with_door(&self, region: Region, vertical: bool, positions: &[usize]) -> bool {
        self.doors.iter().any(|d| {
            let (along, on_boundary) = if vertical {
                (d.col, d.row + 1 == region.r0 || d.row == region.r1 + 1)
            } else {
                (d.row, d.col + 1 == region.c0 || d.col == region.c1 + 1)
            };
            on_boundary && positions.iter().any(|&p| along.abs_diff(p) <= 1)
        })
    }

    fn split(&mut self, region: Region) {
        let can_v = region.width() >= 2 * self.min_room + 1;
        let can_h = region.height() >= 2 * self.min_room + 1;
        if !can_v && !can_h {
            self.rooms.push(region);
            return;
        }
        let vertical = match (can_v, can_h) {
            (true, false) => true,
            (false, true) => false,
            _ => {
                let w = region.width() as f64;
                let h = region.height() as f64;
                self.rng.random_bool(w / (w + h))
            }
        };
        let (lo, extent) = if vertical {
            (region.c0, region.width())
        } else {
            (region.r0, region.height())
        };
        let corridor = extent >= 2 * self.min_room + self.corridor + 2 && self.rng.random_bool(self.cfg.corridor_probability);
        let gap = if corridor { self.corridor + 1 } else { 0 };
        // First wall sits at lo + offset; children keep at least min_room cells.
        let first = self.min_room;
        let last = extent - self.min_room - 1 - gap;
        for _ in 0..20 {
            let offset = self.rng.random_range(first..=last);
            let p = lo + offset;
            let walls: Vec<usize> = if corridor { vec![p, p + gap] } else { vec![p] };
            if self.clashes_with_door(region, vertical, &walls) {
                continue;
            }
            let (a, b) = if vertical {
                (
                    Region { c1: p - 1, ..region },
                    Region {
                        c0: p + gap + 1,
                        ..region
                    },
                )
            } else {
                (
                    Region { r1: p - 1, ..region },
                    Region {
                        r0: p + gap + 1,
                        ..region
                    },
                )
            };
            for &w in &walls {
                if vertical {
                    self.wall_vertical(w, region);
                } else {
                    self.wall_horizontal(w, region);
                }
            }
            self.split(a);
            self.split(b);
            return;
        }
        self.rooms.push(region);
    }

    fn clutter(&mut self) {
        const MARGIN: usize = 3;
        let rooms = self.rooms.clone();
        let mut blocks: Vec<Region> = Vec::new();
        for room in rooms {
            if room.height() < 2 * MARGIN + 4 || room.width() < 2 * MARGIN + 4 {
                continue;
            }
            let count = self.rng.random_range(0..=self.cfg.max_clutter_per_room);
            for _ in 0..count {
                let h = self.rng.random_range(2..=4usize);
                let w = self.rng.random_range(2..=4usize);
                if room.height() < 2 * MARGIN + h || room.width() < 2 * MARGIN + w {
                    continue;
                }
                let r0 = self.rng.random_range(room.r0 + MARGIN..=room.r1 + 1 - MARGIN - h);
                let c0 = self.rng.random_range(room.c0 + MARGIN..=room.c1 + 1 - MARGIN - w);
                let block = Region {
                    r0,
                    c0,
                    r1: r0 + h - 1,
                    c1: c0 + w - 1,
                };
                let overlaps = blocks.iter().any(|b| {
                    block.r0 <= b.r1 + MARGIN && b.r0 <= block.r1 + MARGIN && block.c0 <= b.c1 + MARGIN && b.c0 <= block.c1 + MARGIN
                });
                if overlaps {
                    continue;
                }
                for row in block.r0..=block.r1 {
                    for col in block.c0..=block.c1 {
                        self.obstacles[GridIndex::new(row, col)] = true;
                    }
                }
                blocks.push(block);
            }
        }
    }
}

/// Rooms-and-corridors layout by recursive partitioning. Every partition wall
/// gets a door, so the free space is a single connected component.
pub fn generate_scene(cfg: &SceneGenConfig, seed: u64) -> Result<Scene, WorldError> {
    cfg.validate()?;
    let cols = cfg.cells(cfg.width_m);
    let rows = cfg.cells(cfg.height_m);
    let spec = GridSpec::new(cfg.cell_size, rows, cols, Point::new(0.0, 0.0))?;
    let min_room = cfg.cells(cfg.min_room_m);
    if rows < min_room + 2 || cols < min_room + 2 {
        return Err(WorldError::InvalidConfig("min_room_m does not fit inside the scene".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let attempts = cfg.max_retries.max(1);
    for _ in 0..attempts {
        let mut obstacles = Grid::filled(rows, cols, false);
        for row in 0..rows {
            obstacles[GridIndex::new(row, 0)] = true;
            obstacles[GridIndex::new(row, cols - 1)] = true;
        }
        for col in 0..cols {
            obstacles[GridIndex::new(0, col)] = true;
            obstacles[GridIndex::new(rows - 1, col)] = true;
        }
        let mut layout = Layout {
            cfg,
            rng: &mut rng,
            obstacles,
            doors: Vec::new(),
            rooms: Vec::new(),
            min_room,
            corridor: cfg.cells(cfg.corridor_width_m),
            door: cfg.cells(cfg.door_width_m),
        };
        layout.split(Region {
            r0: 1,
            c0: 1,
            r1: rows - 2,
            c1: cols - 2,
        });
        layout.clutter();
        let scene = Scene::from_obstacles(format!("scene-{seed}"), seed, spec, layout.obstacles);
        if scene.navigable_components() == 1 {
            return Ok(scene);
        }
    }
    Err(WorldError::GenerationFailed { attempts })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let cfg = SceneGenConfig::default();
        let a = generate_scene(&cfg, 1).unwrap();
        let b = generate_scene(&cfg, 1).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let c = generate_scene(&cfg, 2).unwrap();
        assert_ne!(a.obstacles, c.obstacles);
    }

    #[test]
    fn grid_dimensions_follow_config() {
        let cfg = SceneGenConfig {
            width_m: 12.0,
            height_m: 10.0,
            ..Default::default()
        };
        let s = generate_scene(&cfg, 3).unwrap();
        assert_eq!((s.spec.cols, s.spec.rows), (60, 50));
    }

    #[test]
    fn single_component_over_many_seeds() {
        let cfg = SceneGenConfig::default();
        for seed in 0..50 {
            let s = generate_scene(&cfg, seed).unwrap();
            assert_eq!(s.navigable_components(), 1, "seed {seed}");
            assert!(s.area < 100.0);
            // Navigable implies not obstacle.
            assert!(s.navigable.iter().all(|(i, &n)| !n || !s.obstacles[i]));
        }
    }

    #[test]
    fn small_configs_rejected() {
        let cfg = SceneGenConfig {
            width_m: 4.0,
            ..Default::default()
        };
        assert!(matches!(generate_scene(&cfg, 0), Err(WorldError::InvalidConfig(_))));
    }

    #[test]
    fn json_round_trip() {
        let s = generate_scene(&SceneGenConfig::default(), 9).unwrap();
        let back = Scene::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn sweep_collision_respects_touching() {
        let spec = GridSpec::new(1.0, 5, 5, Point::new(0.0, 0.0)).unwrap();
        let mut obstacles = Grid::filled(5, 5, false);
        obstacles[GridIndex::new(2, 3)] = true;
        let scene = Scene::from_obstacles("t", 0, spec, obstacles);
        // Disc centered 0.5 from the obstacle face, radius 0.5: touching only.
        assert!(!scene.disc_collides(Point::new(2.5, 2.5), 0.5));
        assert!(scene.disc_collides(Point::new(2.6, 2.5), 0.5));
        assert!(scene.sweep_collides(Point::new(1.5, 2.5), Point::new(2.7, 2.5), 0.3));
        // Leaving the grid counts as a collision.
        assert!(scene.disc_collides(Point::new(0.1, 2.5), 0.2));
    }
}
