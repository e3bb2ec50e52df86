use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ObjectCategory, ObjectId, Scene, SceneObject, WorldError, NUM_CATEGORIES, SCHEMA_VERSION};
use crate::geometry::{distance_field, Grid, GridIndex, Point, Pose};

/// Rejection-sampling budget per inserted object.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 1000;

const OBJECT_FOOTPRINT: f64 = 0.15;
const VIEWPOINTS_PER_OBJECT: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    /// Minimum pairwise geodesic separation of inserted objects.
    pub fn min_separation(self) -> f64 {
        match self {
            Split::Train => 0.6,
            Split::Val | Split::Test => 1.3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskMode {
    Multion,
    Objectnav,
}

/// Egocentric ray-fan sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    pub fov: f64,
    pub rays: usize,
    pub range: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            fov: PI / 2.0,
            rays: 64,
            range: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub mode: TaskMode,
    pub n_goals: usize,
    pub max_steps: usize,
    pub success_radius: f64,
    pub forward_step: f64,
    pub turn_angle: f64,
    pub agent_radius: f64,
    /// ObjectNav: viewpoints sit this far outside the object footprint.
    pub viewpoint_distance: f64,
    /// ObjectNav: stopping within this distance of a viewpoint succeeds.
    pub viewpoint_tolerance: f64,
    pub sensor: SensorConfig,
}

impl TaskConfig {
    pub fn multion(n_goals: usize) -> Self {
        Self {
            mode: TaskMode::Multion,
            n_goals,
            max_steps: 2500,
            success_radius: 1.0,
            forward_step: 0.25,
            turn_angle: PI / 6.0,
            agent_radius: 0.1,
            viewpoint_distance: 1.0,
            viewpoint_tolerance: 0.1,
            sensor: SensorConfig::default(),
        }
    }

    pub fn objectnav() -> Self {
        Self {
            mode: TaskMode::Objectnav,
            n_goals: 1,
            max_steps: 500,
            agent_radius: 0.18,
            ..Self::multion(1)
        }
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let bad = |m: String| Err(WorldError::InvalidConfig(m));
        match self.mode {
            TaskMode::Multion if !(1..NUM_CATEGORIES).contains(&self.n_goals) => {
                return bad(format!("multion needs 1..=7 goals, got {}", self.n_goals));
            }
            TaskMode::Objectnav if self.n_goals != 1 => {
                return bad(format!("objectnav has exactly one goal, got {}", self.n_goals));
            }
            _ => {}
        }
        let positives = [
            ("success_radius", self.success_radius),
            ("forward_step", self.forward_step),
            ("turn_angle", self.turn_angle),
            ("agent_radius", self.agent_radius),
            ("viewpoint_distance", self.viewpoint_distance),
            ("viewpoint_tolerance", self.viewpoint_tolerance),
            ("sensor.fov", self.sensor.fov),
            ("sensor.range", self.sensor.range),
        ];
        for (name, v) in positives {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.max_steps == 0 || self.sensor.rays < 2 {
            return bad("max_steps must be >= 1 and sensor.rays >= 2".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub schema_version: u32,
    pub id: String,
    pub scene_id: String,
    pub split: Split,
    pub seed: u64,
    pub task: TaskConfig,
    pub start: Pose,
    /// Every inserted object; ids index this list.
    pub objects: Vec<SceneObject>,
    pub goals: Vec<ObjectId>,
    pub distractors: Vec<ObjectId>,
    /// ObjectNav success viewpoints around the goal object (empty for MultiON).
    pub viewpoints: Vec<Point>,
}

impl Episode {
    pub fn object(&self, id: ObjectId) -> &SceneObject {
        &self.objects[id as usize]
    }

    pub fn goal(&self, index: usize) -> Option<&SceneObject> {
        self.goals.get(index).map(|&id| self.object(id))
    }

    pub fn to_json(&self) -> Result<String, WorldError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, WorldError> {
        let ep: Episode = serde_json::from_str(text)?;
        if ep.schema_version != SCHEMA_VERSION {
            return Err(WorldError::SchemaVersion(ep.schema_version));
        }
        Ok(ep)
    }
}

/// Samples a start pose and inserts one object per category: the first
/// `n_goals` of a random category order become goals, the remaining
/// `8 - n_goals` distractors. The start counts as an inserted point for the
/// separation constraint.
///
/// Object placement consumes the random stream identically for every
/// `n_goals`, so the same seed yields the same layout with only the goal
/// count differing.
pub fn generate_episode(scene: &Scene, task: TaskConfig, split: Split, seed: u64) -> Result<Episode, WorldError> {
    task.validate()?;
    let nav = scene.navigable_for(task.agent_radius);
    let candidates: Vec<GridIndex> = nav.iter().filter(|(_, &n)| n).map(|(i, _)| i).collect();
    if candidates.len() < NUM_CATEGORIES + 1 {
        return Err(WorldError::PlacementFailed {
            placed: 0,
            needed: NUM_CATEGORIES,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut categories = ObjectCategory::ALL;
    categories.shuffle(&mut rng);

    let separation = split.min_separation();
    let cs = scene.spec.cell_size;
    let start_cell = candidates[rng.random_range(0..candidates.len())];
    let start_heading = rng.random_range(0..12usize) as f64 * (PI / 6.0);
    let start_pt = scene.spec.cell_center(start_cell);
    let start = Pose::new(start_pt.x, start_pt.y, start_heading);

    let mut fields: Vec<Grid<f64>> = vec![distance_field(&nav, cs, start_cell)];
    let mut objects = Vec::with_capacity(NUM_CATEGORIES);
    for (i, &category) in categories.iter().enumerate() {
        let mut placed = None;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let cell = candidates[rng.random_range(0..candidates.len())];
            // The start field is finite exactly on the start's component.
            let ok = fields.iter().all(|f| {
                let d = f[cell];
                d.is_finite() && d >= separation
            });
            if ok {
                placed = Some(cell);
                break;
            }
        }
        let cell = placed.ok_or(WorldError::PlacementFailed {
            placed: i,
            needed: NUM_CATEGORIES,
        })?;
        fields.push(distance_field(&nav, cs, cell));
        objects.push(SceneObject {
            id: i as ObjectId,
            category,
            color: category.rgb(),
            position: scene.spec.cell_center(cell),
            footprint_radius: OBJECT_FOOTPRINT,
        });
    }

    let n = task.n_goals;
    let goals: Vec<ObjectId> = (0..n as ObjectId).collect();
    let distractors: Vec<ObjectId> = (n as ObjectId..NUM_CATEGORIES as ObjectId).collect();
    let viewpoints = match task.mode {
        TaskMode::Objectnav => viewpoints_around(scene, &objects[0], &task),
        TaskMode::Multion => Vec::new(),
    };
    Ok(Episode {
        schema_version: SCHEMA_VERSION,
        id: format!("{}-{}-s{seed}", scene.id, split.name()),
        scene_id: scene.id.clone(),
        split,
        seed,
        task,
        start,
        objects,
        goals,
        distractors,
        viewpoints,
    })
}

/// Evenly spaced ring of viewpoints at `viewpoint_distance` outside the
/// footprint, keeping only those the agent body can occupy.
fn viewpoints_around(scene: &Scene, object: &SceneObject, task: &TaskConfig) -> Vec<Point> {
    let radius = object.footprint_radius + task.viewpoint_distance;
    (0..VIEWPOINTS_PER_OBJECT)
        .map(|k| {
            let a = k as f64 * 2.0 * PI / VIEWPOINTS_PER_OBJECT as f64;
            object.position.add(Point::from_angle(a).scale(radius))
        })
        .filter(|&p| scene.spec.contains(p) && !scene.disc_collides(p, task.agent_radius))
        .collect()
}

/// ObjectNav success: the agent stands within `viewpoint_tolerance` of any
/// precomputed viewpoint.
pub fn success_check_objectnav(pose: &Pose, episode: &Episode) -> bool {
    let p = pose.position();
    episode
        .viewpoints
        .iter()
        .any(|v| v.distance(p) <= episode.task.viewpoint_tolerance)
}
