//! Scenes, episodes and the discrete-action simulator.

mod episode;
mod scene;
mod sim;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, Point};

pub use episode::{
    generate_episode, success_check_objectnav, Episode, Split, TaskConfig, TaskMode, SensorConfig,
    MAX_PLACEMENT_ATTEMPTS,
};
pub use scene::{generate_scene, Scene, SceneGenConfig};
pub use sim::{
    Action, AgentState, DepthRay, Observation, Simulator, StepOutcome, Termination, VisibleObject,
};

/// Version stamped into every serialized scene, episode and result file.
pub const SCHEMA_VERSION: u32 = 1;

pub const NUM_CATEGORIES: usize = 8;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("scene generation failed after {attempts} attempts")]
    GenerationFailed { attempts: usize },
    #[error("could not place object {placed} of {needed} with the required separation")]
    PlacementFailed { placed: usize, needed: usize },
    #[error("action {action:?} is not valid in {mode:?} mode")]
    ActionInvalidForMode { action: Action, mode: TaskMode },
    #[error("episode is already over")]
    EpisodeOver,
    #[error("episode {episode} belongs to scene {expected}, not {actual}")]
    SceneMismatch {
        episode: String,
        expected: String,
        actual: String,
    },
    #[error("unsupported schema version {0}")]
    SchemaVersion(u32),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// The eight object categories shared by goals and distractors. For
/// cylinder objects the category is the cylinder color.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectCategory {
    Red,
    Green,
    Blue,
    Yellow,
    White,
    Pink,
    Black,
    Cyan,
}

impl ObjectCategory {
    pub const ALL: [ObjectCategory; NUM_CATEGORIES] = [
        ObjectCategory::Red,
        ObjectCategory::Green,
        ObjectCategory::Blue,
        ObjectCategory::Yellow,
        ObjectCategory::White,
        ObjectCategory::Pink,
        ObjectCategory::Black,
        ObjectCategory::Cyan,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ObjectCategory::Red => "red",
            ObjectCategory::Green => "green",
            ObjectCategory::Blue => "blue",
            ObjectCategory::Yellow => "yellow",
            ObjectCategory::White => "white",
            ObjectCategory::Pink => "pink",
            ObjectCategory::Black => "black",
            ObjectCategory::Cyan => "cyan",
        }
    }

    /// Canonical surface color.
    pub fn rgb(self) -> [u8; 3] {
        match self {
            ObjectCategory::Red => [220, 30, 30],
            ObjectCategory::Green => [30, 180, 40],
            ObjectCategory::Blue => [30, 60, 220],
            ObjectCategory::Yellow => [235, 220, 40],
            ObjectCategory::White => [245, 245, 245],
            ObjectCategory::Pink => [240, 120, 200],
            ObjectCategory::Black => [20, 20, 20],
            ObjectCategory::Cyan => [40, 220, 230],
        }
    }
}

impl fmt::Display for ObjectCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObjectCategory {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|c| c.name() == lower)
            .ok_or_else(|| format!("unknown category {s:?}"))
    }
}

pub type ObjectId = u32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: ObjectId,
    pub category: ObjectCategory,
    pub color: [u8; 3],
    pub position: Point,
    pub footprint_radius: f64,
}
