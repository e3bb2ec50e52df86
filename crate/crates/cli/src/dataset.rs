use std::collections::BTreeMap;
use std::path::Path;

use mopa::geometry::{distance_field, geodesic_distance, GridIndex};
use mopa::world::{generate_episode, generate_scene, Episode, Scene, Split, NUM_CATEGORIES, SCHEMA_VERSION};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{io_err, CliError};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub scenes: Vec<String>,
    /// Episode count per split.
    pub splits: BTreeMap<Split, usize>,
    pub episodes: usize,
    /// Relative paths of every data file, sorted.
    pub files: Vec<String>,
}

pub struct Dataset {
    pub scenes: Vec<Scene>,
    pub episodes: Vec<Episode>,
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn scene_path(id: &str) -> String {
    format!("scenes/{id}.json")
}

fn episode_path(split: Split, id: &str) -> String {
    format!("episodes/{}/{id}.json", split.name())
}

/// Generates every scene and episode of `cfg` under `dir`.
pub fn generate(cfg: &RunConfig, dir: &Path) -> Result<Manifest, CliError> {
    let task = cfg.task();
    let runtime = |e: mopa::world::WorldError| CliError::Runtime(e.to_string());
    let mut files = Vec::new();
    let mut scenes = Vec::new();
    let mut splits = BTreeMap::new();
    for s in 0..cfg.scenes {
        let scene = generate_scene(&cfg.scene_gen, cfg.scene_seed + s as u64).map_err(runtime)?;
        let rel = scene_path(&scene.id);
        write_file(&dir.join(&rel), scene.to_json().map_err(runtime)?.as_bytes())?;
        files.push(rel);
        for (k, &split) in cfg.splits.iter().enumerate() {
            for e in 0..cfg.episodes_per_scene {
                let offset = (k * cfg.scenes + s) * cfg.episodes_per_scene + e;
                let ep = generate_episode(&scene, task, split, cfg.episode_seed + offset as u64).map_err(runtime)?;
                let rel = episode_path(split, &ep.id);
                write_file(&dir.join(&rel), ep.to_json().map_err(runtime)?.as_bytes())?;
                files.push(rel);
                *splits.entry(split).or_insert(0) += 1;
            }
        }
        scenes.push(scene.id);
    }
    files.sort();
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        scenes,
        episodes: splits.values().sum(),
        splits,
        files,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&dir.join(MANIFEST), text.as_bytes())?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, CliError> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Data(format!("missing dataset at {}: {e}", dir.display())))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    if m.schema_version != SCHEMA_VERSION {
        return Err(CliError::Data(format!("manifest schema_version {} unsupported", m.schema_version)));
    }
    Ok(m)
}

fn read_data(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn load_scene(path: &Path) -> Result<Scene, CliError> {
    Scene::from_json(&read_data(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn load_episode(path: &Path) -> Result<Episode, CliError> {
    Episode::from_json(&read_data(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Loads the scenes and the episodes of `splits` listed in the manifest.
pub fn load(dir: &Path, splits: &[Split]) -> Result<Dataset, CliError> {
    let manifest = read_manifest(dir)?;
    let scenes = manifest
        .scenes
        .iter()
        .map(|id| load_scene(&dir.join(scene_path(id))))
        .collect::<Result<Vec<_>, _>>()?;
    let wanted: Vec<String> = splits.iter().map(|s| format!("episodes/{}/", s.name())).collect();
    let episodes = manifest
        .files
        .iter()
        .filter(|f| wanted.iter().any(|w| f.starts_with(w.as_str())))
        .map(|f| load_episode(&dir.join(f)))
        .collect::<Result<Vec<_>, _>>()?;
    if episodes.is_empty() {
        return Err(CliError::Data(format!("no episodes for splits {splits:?} in {}", dir.display())));
    }
    Ok(Dataset { scenes, episodes })
}

/// Problems with one episode: object counts, split separation and goal
/// reachability from the start.
pub fn episode_problems(scene: &Scene, ep: &Episode) -> Vec<String> {
    let mut out = Vec::new();
    let n = ep.goals.len();
    if n != ep.task.n_goals || ep.distractors.len() != NUM_CATEGORIES - n {
        out.push(format!("{} goals and {} distractors", n, ep.distractors.len()));
    }
    let nav = scene.navigable_for(ep.task.agent_radius);
    let start = ep.start.position();
    for &g in &ep.goals {
        match geodesic_distance(&nav, &scene.spec, start, ep.object(g).position) {
            Ok(Some(_)) => {}
            _ => out.push(format!("goal {g} unreachable from start")),
        }
    }
    let cells: Vec<Option<GridIndex>> = std::iter::once(start)
        .chain(ep.objects.iter().map(|o| o.position))
        .map(|p| scene.spec.world_to_grid(p).ok())
        .collect();
    let sep = ep.split.min_separation();
    for (i, a) in cells.iter().enumerate() {
        let Some(a) = *a else {
            out.push(format!("point {i} off the grid"));
            continue;
        };
        let field = distance_field(&nav, scene.spec.cell_size, a);
        for (j, b) in cells.iter().enumerate().skip(i + 1) {
            if let Some(b) = *b {
                if field[b] < sep - 1e-9 {
                    out.push(format!("points {i} and {j} closer than {sep} m"));
                }
            }
        }
    }
    out
}

/// Checks every file listed in the manifest. Returns (episodes checked,
/// problems found).
pub fn validate(dir: &Path) -> Result<(usize, Vec<String>), CliError> {
    let manifest = read_manifest(dir)?;
    let mut problems = Vec::new();
    for f in &manifest.files {
        if !dir.join(f).is_file() {
            problems.push(format!("{f}: listed in manifest but missing"));
        }
    }
    let data = load(dir, &Split::ALL)?;
    for ep in &data.episodes {
        match data.scenes.iter().find(|s| s.id == ep.scene_id) {
            None => problems.push(format!("{}: scene {} not in dataset", ep.id, ep.scene_id)),
            Some(scene) => problems.extend(episode_problems(scene, ep).into_iter().map(|p| format!("{}: {p}", ep.id))),
        }
    }
    if data.episodes.len() != manifest.episodes {
        problems.push(format!("manifest lists {} episodes, found {}", manifest.episodes, data.episodes.len()));
    }
    Ok((data.episodes.len(), problems))
}
