//! Choice between the task goal and the exploration goal.

use serde::{Deserialize, Serialize};

use crate::geometry::{distance_field, Grid, GridIndex, Point};
use crate::mapping::{query_goal_cells, CellState, Maps};
use crate::world::ObjectCategory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    TaskGoal,
    Exploration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanTarget {
    pub point: Point,
    pub kind: TargetKind,
    /// Member cells of the chosen label cluster for task-goal targets.
    pub cluster: Vec<GridIndex>,
}

impl PlanTarget {
    pub fn exploration(point: Point) -> Self {
        Self {
            point,
            kind: TargetKind::Exploration,
            cluster: Vec::new(),
        }
    }
}

/// Groups cells into 8-connected clusters. Clusters are ordered by their
/// first cell; members are sorted row-major.
pub fn cluster_cells(cells: &[GridIndex]) -> Vec<Vec<GridIndex>> {
    let mut sorted = cells.to_vec();
    sorted.sort();
    sorted.dedup();
    let mut assigned = vec![false; sorted.len()];
    let mut clusters = Vec::new();
    for seed in 0..sorted.len() {
        if assigned[seed] {
            continue;
        }
        assigned[seed] = true;
        let mut members = vec![sorted[seed]];
        let mut i = 0;
        while i < members.len() {
            let cur = members[i];
            for (j, &c) in sorted.iter().enumerate() {
                if !assigned[j] && cur.is_adjacent8(c) {
                    assigned[j] = true;
                    members.push(c);
                }
            }
            i += 1;
        }
        members.sort();
        clusters.push(members);
    }
    clusters
}

/// Member cell closest to the cluster centroid in index space; ties go to
/// the first cell in row-major order.
pub fn snapped_centroid(cluster: &[GridIndex]) -> GridIndex {
    assert!(!cluster.is_empty(), "empty cluster");
    let n = cluster.len() as f64;
    let cr = cluster.iter().map(|c| c.row as f64).sum::<f64>() / n;
    let cc = cluster.iter().map(|c| c.col as f64).sum::<f64>() / n;
    let mut best = cluster[0];
    let mut best_d = f64::INFINITY;
    let mut sorted = cluster.to_vec();
    sorted.sort();
    for c in sorted {
        let d = (c.row as f64 - cr).powi(2) + (c.col as f64 - cc).powi(2);
        if d < best_d - 1e-12 {
            best = c;
            best_d = d;
        }
    }
    best
}

/// Known free space plus labeled cells, used to rank clusters by geodesic
/// distance from the agent.
fn explored_free(maps: &Maps) -> Grid<bool> {
    Grid::from_fn(maps.spec().rows, maps.spec().cols, |i| {
        maps.occupancy.cells[i] == CellState::Free || maps.semantic.labels[i].is_some()
    })
}

/// Returns the snapped centroid of the nearest cluster labeled `goal`, or
/// the exploration goal when the category is not on the map.
pub fn select_target(maps: &Maps, agent: Point, goal: ObjectCategory, expl_goal: Option<Point>) -> Option<PlanTarget> {
    let cells = query_goal_cells(&maps.semantic, goal);
    if cells.is_empty() {
        return expl_goal.map(PlanTarget::exploration);
    }
    let spec = maps.spec();
    let mut clusters = cluster_cells(&cells);
    let mut chosen = 0;
    if clusters.len() > 1 {
        let free = explored_free(maps);
        let field = spec
            .world_to_grid(agent)
            .ok()
            .filter(|&a| free[a])
            .map(|a| distance_field(&free, spec.cell_size, a));
        let geodesic: Vec<f64> = clusters
            .iter()
            .map(|cl| match &field {
                Some(f) => cl.iter().map(|&c| f[c]).fold(f64::INFINITY, f64::min),
                None => f64::INFINITY,
            })
            .collect();
        let key: Vec<f64> = if geodesic.iter().any(|d| d.is_finite()) {
            geodesic
        } else {
            clusters
                .iter()
                .map(|cl| spec.cell_center(snapped_centroid(cl)).distance(agent))
                .collect()
        };
        let mut best = f64::INFINITY;
        for (i, &d) in key.iter().enumerate() {
            if d < best {
                best = d;
                chosen = i;
            }
        }
    }
    let cluster = clusters.swap_remove(chosen);
    let cell = snapped_centroid(&cluster);
    Some(PlanTarget {
        point: spec.cell_center(cell),
        kind: TargetKind::TaskGoal,
        cluster,
    })
}
