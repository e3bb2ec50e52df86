use std::collections::BTreeSet;

/// Optimal route summary: minimum hop count and minimum metric length. The
/// two optima are searched independently and may come from different paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OraclePath {
    pub hops: usize,
    pub length: f64,
}

fn moves(free: &[Vec<bool>], r: usize, c: usize) -> Vec<(usize, usize, bool)> {
    let rows = free.len() as isize;
    let cols = free[0].len() as isize;
    let ok = |rr: isize, cc: isize| rr >= 0 && cc >= 0 && rr < rows && cc < cols && free[rr as usize][cc as usize];
    let mut out = Vec::new();
    for dr in -1isize..=1 {
        for dc in -1isize..=1 {
            if dr == 0 && dc == 0 {
                continue;
            }
            let (nr, nc) = (r as isize + dr, c as isize + dc);
            if !ok(nr, nc) {
                continue;
            }
            let diagonal = dr != 0 && dc != 0;
            if diagonal && !(ok(r as isize + dr, c as isize) && ok(r as isize, c as isize + dc)) {
                continue;
            }
            out.push((nr as usize, nc as usize, diagonal));
        }
    }
    out
}

/// Exhaustive label-setting search with a linear-scan priority queue.
fn exhaustive(free: &[Vec<bool>], from: (usize, usize), to: (usize, usize), axis: f64, diag: f64) -> Option<f64> {
    let rows = free.len();
    let cols = free[0].len();
    if !free[from.0][from.1] || !free[to.0][to.1] {
        return None;
    }
    let mut dist = vec![vec![f64::INFINITY; cols]; rows];
    let mut done = vec![vec![false; cols]; rows];
    dist[from.0][from.1] = 0.0;
    loop {
        let mut best: Option<(usize, usize)> = None;
        for r in 0..rows {
            for c in 0..cols {
                if !done[r][c] && dist[r][c].is_finite() && best.is_none_or(|(br, bc)| dist[r][c] < dist[br][bc]) {
                    best = Some((r, c));
                }
            }
        }
        let (r, c) = best?;
        if (r, c) == to {
            return Some(dist[r][c]);
        }
        done[r][c] = true;
        for (nr, nc, diagonal) in moves(free, r, c) {
            let cand = dist[r][c] + if diagonal { diag } else { axis };
            if cand < dist[nr][nc] {
                dist[nr][nc] = cand;
            }
        }
    }
}

/// Optimal 8-connected route between two free cells of `free` (true = free),
/// with diagonal moves disallowed when either orthogonal cell is blocked.
pub fn oracle_dijkstra(free: &[Vec<bool>], from: (usize, usize), to: (usize, usize), cell_size: f64) -> Option<OraclePath> {
    let hops = exhaustive(free, from, to, 1.0, 1.0)?;
    let length = exhaustive(free, from, to, cell_size, cell_size * std::f64::consts::SQRT_2)?;
    Some(OraclePath {
        hops: hops.round() as usize,
        length,
    })
}

/// All cells `(row, col)` whose closed square (grown by `eps` cell units)
/// intersects the segment, found by testing every cell of the grid.
pub fn brute_supercover(
    rows: usize,
    cols: usize,
    origin: (f64, f64),
    cell_size: f64,
    from: (f64, f64),
    to: (f64, f64),
    eps: f64,
) -> BTreeSet<(usize, usize)> {
    let u0 = (from.0 - origin.0) / cell_size;
    let v0 = (from.1 - origin.1) / cell_size;
    let u1 = (to.0 - origin.0) / cell_size;
    let v1 = (to.1 - origin.1) / cell_size;
    let mut out = BTreeSet::new();
    for r in 0..rows {
        for c in 0..cols {
            let lo = (c as f64 - eps, r as f64 - eps);
            let hi = (c as f64 + 1.0 + eps, r as f64 + 1.0 + eps);
            if segment_hits_box((u0, v0), (u1, v1), lo, hi) {
                out.insert((r, c));
            }
        }
    }
    out
}

fn segment_hits_box(a: (f64, f64), b: (f64, f64), lo: (f64, f64), hi: (f64, f64)) -> bool {
    // Separating-axis test: box axes, then the segment normal.
    if a.0.max(b.0) < lo.0 || a.0.min(b.0) > hi.0 || a.1.max(b.1) < lo.1 || a.1.min(b.1) > hi.1 {
        return false;
    }
    let n = (-(b.1 - a.1), b.0 - a.0);
    let corners = [(lo.0, lo.1), (hi.0, lo.1), (lo.0, hi.1), (hi.0, hi.1)];
    let side = |p: (f64, f64)| n.0 * (p.0 - a.0) + n.1 * (p.1 - a.1);
    let s: Vec<f64> = corners.iter().map(|&p| side(p)).collect();
    let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    min <= 0.0 && max >= 0.0
}

/// Member cell nearest to the fractional centroid `(row, col)`; exact ties
/// (within 1e-12) resolve to the smallest row-major index.
pub fn nearest_member(cells: &[(usize, usize)], centroid: (f64, f64)) -> Option<(usize, usize)> {
    let mut sorted = cells.to_vec();
    sorted.sort();
    let mut best: Option<((usize, usize), f64)> = None;
    for &(r, c) in &sorted {
        let d = (r as f64 - centroid.0).powi(2) + (c as f64 - centroid.1).powi(2);
        match best {
            Some((_, bd)) if d >= bd - 1e-12 => {}
            _ => best = Some(((r, c), d)),
        }
    }
    best.map(|(cell, _)| cell)
}

/// Wilson-Hilferty approximation of the chi-square quantile for `df`
/// degrees of freedom at standard-normal quantile `z`.
pub fn chi_square_critical(df: usize, z: f64) -> f64 {
    let k = df as f64;
    let a = 2.0 / (9.0 * k);
    k * (1.0 - a + z * a.sqrt()).powi(3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn open_grid_corner_to_corner() {
        let free = vec![vec![true; 20]; 20];
        let p = oracle_dijkstra(&free, (0, 0), (19, 19), 0.2).unwrap();
        assert_eq!(p.hops, 19);
        assert!((p.length - 19.0 * 0.2 * std::f64::consts::SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn blocked_reports_none() {
        let mut free = vec![vec![true; 5]; 5];
        for row in free.iter_mut() {
            row[2] = false;
        }
        assert!(oracle_dijkstra(&free, (0, 0), (4, 4), 1.0).is_none());
    }

    #[test]
    fn chi_square_quantile_close_to_tables() {
        // Table value for df = 99 at p = 0.999 is 148.23.
        assert!((chi_square_critical(99, 3.090) - 148.23).abs() < 0.5);
    }

    #[test]
    fn brute_supercover_corner_case() {
        let cells = brute_supercover(3, 3, (0.0, 0.0), 1.0, (0.5, 0.5), (2.5, 2.5), 1e-9);
        assert_eq!(cells.len(), 7);
    }
}
