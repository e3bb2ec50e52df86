use std::collections::BTreeSet;

use mopa::geometry::*;
use mopa::world::{generate_scene, SceneGenConfig};
use mopa_fixtures::brute_supercover;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spec(rows: usize, cols: usize) -> GridSpec {
    GridSpec::new(0.2, rows, cols, Point::new(0.0, 0.0)).unwrap()
}

#[test]
fn world_to_grid_examples() {
    let s = spec(25, 25);
    assert_eq!(s.world_to_grid(Point::new(0.0, 0.0)).unwrap(), GridIndex::new(0, 0));
    assert_eq!(s.world_to_grid(Point::new(0.45, 0.21)).unwrap(), GridIndex::new(1, 2));
    assert!(s.world_to_grid(Point::new(10.0, 10.0)).is_err());
    assert_eq!(s.world_to_grid(s.max_corner()).unwrap(), GridIndex::new(24, 24));
}

#[test]
fn corner_touching_diagonal_is_blocked() {
    let s = spec(4, 4);
    let mut obstacles = Grid::filled(4, 4, false);
    obstacles[GridIndex::new(1, 2)] = true;
    obstacles[GridIndex::new(2, 1)] = true;
    let from = s.cell_center(GridIndex::new(1, 1));
    let to = s.cell_center(GridIndex::new(2, 2));
    assert!(raycast(&obstacles, &s, from, to).unwrap().is_blocked());
    let cells: BTreeSet<_> = supercover(&s, from, to).unwrap().into_iter().map(|c| (c.row, c.col)).collect();
    let oracle = brute_supercover(4, 4, (0.0, 0.0), 0.2, (from.x, from.y), (to.x, to.y), 1e-9);
    assert_eq!(cells, oracle);
    assert!(cells.contains(&(1, 2)) && cells.contains(&(2, 1)));
}

#[test]
fn geodesic_examples() {
    let s = spec(3, 12);
    let free = Grid::filled(3, 12, true);
    let a = s.cell_center(GridIndex::new(1, 0));
    let b = s.cell_center(GridIndex::new(1, 10));
    assert_eq!(geodesic_distance(&free, &s, a, a).unwrap(), Some(0.0));
    let d = geodesic_distance(&free, &s, a, b).unwrap().unwrap();
    assert!((d - 2.0).abs() <= 0.2 + 1e-9);
    let mut split = free.clone();
    for r in 0..3 {
        split[GridIndex::new(r, 5)] = false;
    }
    assert_eq!(geodesic_distance(&split, &s, a, b).unwrap(), None);
}

#[test]
fn geodesic_metric_properties_on_scenes() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..4 {
        let scene = generate_scene(&SceneGenConfig::default(), seed).unwrap();
        let nav = &scene.navigable;
        let cells: Vec<GridIndex> = nav.iter().filter(|(_, &n)| n).map(|(i, _)| i).collect();
        let cs = scene.spec.cell_size;
        for _ in 0..20 {
            let pick = |rng: &mut ChaCha8Rng| cells[rng.random_range(0..cells.len())];
            let (a, b, c) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
            let fa = distance_field(nav, cs, a);
            let fb = distance_field(nav, cs, b);
            let (ab, ba, ac, bc) = (fa[b], fb[a], fa[c], fb[c]);
            assert!(ab.is_finite() && ab >= 0.0);
            assert!((ab - ba).abs() < 1e-9, "symmetry");
            assert!(ac <= ab + bc + 1e-9, "triangle inequality");
            let euclid = scene.spec.cell_center(a).distance(scene.spec.cell_center(b));
            assert!(ab >= euclid - cs * std::f64::consts::SQRT_2 - 1e-9);
        }
    }
}

fn point_in(rows: usize, cols: usize) -> impl Strategy<Value = Point> {
    (0.0..rows as f64 * 0.2, 0.0..cols as f64 * 0.2).prop_map(|(y, x)| Point::new(x, y))
}

proptest! {
    #[test]
    fn supercover_matches_brute_force(from in point_in(12, 12), to in point_in(12, 12)) {
        let s = spec(12, 12);
        let got: Vec<GridIndex> = supercover(&s, from, to).unwrap();
        let set: BTreeSet<_> = got.iter().map(|c| (c.row, c.col)).collect();
        prop_assert_eq!(set.len(), got.len(), "no repeated cells");
        let oracle = brute_supercover(12, 12, (0.0, 0.0), 0.2, (from.x, from.y), (to.x, to.y), 1e-9);
        prop_assert_eq!(set, oracle);
    }

    #[test]
    fn supercover_is_ordered_along_segment(from in point_in(12, 12), to in point_in(12, 12)) {
        let s = spec(12, 12);
        let params: Vec<f64> = supercover(&s, from, to)
            .unwrap()
            .into_iter()
            .map(|c| segment_entry_param(&s, c, from, to).unwrap())
            .collect();
        prop_assert!(params.windows(2).all(|w| w[0] <= w[1] + 1e-9));
    }

    #[test]
    fn raycast_is_symmetric(
        from in point_in(10, 10),
        to in point_in(10, 10),
        blocked in proptest::collection::vec(0u8..4, 100),
    ) {
        let s = spec(10, 10);
        let obstacles = Grid::from_vec(10, 10, blocked.iter().map(|&b| b == 0).collect()).unwrap();
        let ab = raycast(&obstacles, &s, from, to).unwrap();
        let ba = raycast(&obstacles, &s, to, from).unwrap();
        prop_assert_eq!(ab.is_blocked(), ba.is_blocked());
        let forward: BTreeSet<_> = supercover(&s, from, to).unwrap().into_iter().collect();
        let backward: BTreeSet<_> = supercover(&s, to, from).unwrap().into_iter().collect();
        prop_assert_eq!(forward, backward);
    }

    #[test]
    fn cell_center_round_trips(row in 0usize..40, col in 0usize..50) {
        let s = spec(40, 50);
        let idx = GridIndex::new(row, col);
        prop_assert_eq!(s.world_to_grid(s.cell_center(idx)).unwrap(), idx);
    }

    #[test]
    fn pose_heading_normalized(x in -10.0..10.0f64, y in -10.0..10.0f64, h in -50.0..50.0f64, d in -20.0..20.0f64) {
        let p = Pose::new(x, y, h).turned(d);
        prop_assert!((0.0..std::f64::consts::TAU).contains(&p.heading));
    }
}
