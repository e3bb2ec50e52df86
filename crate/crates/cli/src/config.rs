use std::path::{Path, PathBuf};

use mopa::agent::AgentConfig;
use mopa::world::{SceneGenConfig, Split, TaskConfig, TaskMode};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// One experiment: dataset recipe, agent, repetitions and output location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub mode: TaskMode,
    #[serde(default = "default_n_goals")]
    pub n_goals: usize,
    /// Overrides the task's default step budget.
    #[serde(default)]
    pub max_steps: Option<usize>,
    #[serde(default = "default_splits")]
    pub splits: Vec<Split>,
    pub scenes: usize,
    /// Episodes per scene and split.
    pub episodes_per_scene: usize,
    #[serde(default)]
    pub scene_seed: u64,
    #[serde(default = "default_episode_seed")]
    pub episode_seed: u64,
    #[serde(default = "default_run_seed")]
    pub run_seed: u64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub scene_gen: SceneGenConfig,
    #[serde(default)]
    pub agent: AgentConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Defaults to `<output_dir>/dataset`.
    #[serde(default)]
    pub dataset_dir: Option<PathBuf>,
}

fn default_n_goals() -> usize {
    3
}
fn default_splits() -> Vec<Split> {
    vec![Split::Test]
}
fn default_episode_seed() -> u64 {
    1000
}
fn default_run_seed() -> u64 {
    7
}
fn default_runs() -> usize {
    1
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("mopa-out")
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return bad(format!("unsupported config schema_version {}", self.schema_version));
        }
        if self.scenes == 0 || self.episodes_per_scene == 0 {
            return bad("scenes and episodes_per_scene must be >= 1".into());
        }
        if self.runs == 0 {
            return bad("runs must be >= 1".into());
        }
        if self.splits.is_empty() {
            return bad("splits must not be empty".into());
        }
        self.task().validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.agent.validate().map_err(CliError::Config)?;
        Ok(())
    }

    pub fn task(&self) -> TaskConfig {
        let mut task = match self.mode {
            TaskMode::Multion => TaskConfig::multion(self.n_goals),
            TaskMode::Objectnav => TaskConfig::objectnav(),
        };
        if let Some(m) = self.max_steps {
            task.max_steps = m;
        }
        task
    }

    pub fn output_dir(&self) -> PathBuf {
        resolve(&self.output_dir)
    }

    pub fn dataset_dir(&self) -> PathBuf {
        match &self.dataset_dir {
            Some(d) => resolve(d),
            None => self.output_dir().join("dataset"),
        }
    }
}

/// Relative paths are taken under `MOPA_OUTPUT_ROOT` when it is set.
pub fn resolve(p: &Path) -> PathBuf {
    match std::env::var_os("MOPA_OUTPUT_ROOT") {
        Some(root) if p.is_relative() => PathBuf::from(root).join(p),
        _ => p.to_path_buf(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"schema_version": 1, "mode": "multion", "scenes": 2, "episodes_per_scene": 3}"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.n_goals, 3);
        assert_eq!(cfg.splits, vec![Split::Test]);
        assert_eq!(cfg.task().max_steps, 2500);
        let again = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn unknown_keys_and_versions_rejected() {
        let extra = MINIMAL.replace("\"scenes\"", "\"bogus\": 1, \"scenes\"");
        assert!(matches!(RunConfig::from_json(&extra), Err(CliError::Config(_))));
        let v2 = MINIMAL.replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(matches!(RunConfig::from_json(&v2), Err(CliError::Config(_))));
        let nested = MINIMAL.replace("}", r#", "agent": {"exploration": {"alpha": 3}}}"#);
        assert!(RunConfig::from_json(&nested).is_err());
    }
}
