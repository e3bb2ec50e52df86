//! Hand-built ASCII maps with hand-computed optimal routes.
//!
//! File format: `key: value` header lines (`id`, `hops`, `length`, with
//! `none` for unreachable), then grid rows where `#` is blocked, `.` free,
//! `S` the start and `G` the goal. Lengths assume unit cells.

use std::path::Path;

use crate::golden::data_dir;

#[derive(Debug, Clone, PartialEq)]
pub struct MicroMap {
    pub id: String,
    pub free: Vec<Vec<bool>>,
    pub start: (usize, usize),
    pub goal: (usize, usize),
    pub expected_hops: Option<usize>,
    pub expected_length: Option<f64>,
}

impl MicroMap {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut id = None;
        let mut hops = None;
        let mut length = None;
        let mut free = Vec::new();
        let mut start = None;
        let mut goal = None;
        for line in text.lines().map(str::trim_end).filter(|l| !l.is_empty()) {
            if let Some((key, value)) = line.split_once(':') {
                let value = value.trim();
                match key.trim() {
                    "id" => id = Some(value.to_string()),
                    "hops" => hops = Some(value.parse::<usize>().ok()),
                    "length" => length = Some(value.parse::<f64>().ok()),
                    other => return Err(format!("unknown header {other}")),
                }
                continue;
            }
            let r = free.len();
            let mut row = Vec::new();
            for (c, ch) in line.chars().enumerate() {
                match ch {
                    '#' => row.push(false),
                    '.' => row.push(true),
                    'S' => {
                        start = Some((r, c));
                        row.push(true);
                    }
                    'G' => {
                        goal = Some((r, c));
                        row.push(true);
                    }
                    other => return Err(format!("bad cell {other:?}")),
                }
            }
            free.push(row);
        }
        if free.is_empty() || free.iter().any(|r| r.len() != free[0].len()) {
            return Err("ragged or empty grid".into());
        }
        Ok(Self {
            id: id.ok_or("missing id")?,
            free,
            start: start.ok_or("missing S")?,
            goal: goal.ok_or("missing G")?,
            expected_hops: hops.ok_or("missing hops")?,
            expected_length: length.ok_or("missing length")?,
        })
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
        Self::parse(&text)
    }

    pub fn load_all() -> Vec<MicroMap> {
        let dir = data_dir().join("micromaps");
        let mut paths: Vec<_> = std::fs::read_dir(&dir)
            .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        paths.sort();
        paths.iter().map(|p| Self::load(p).unwrap()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::oracle_dijkstra;

    #[test]
    fn oracle_matches_hand_computed_fixtures() {
        let maps = MicroMap::load_all();
        assert!(maps.len() >= 3);
        for m in maps {
            let got = oracle_dijkstra(&m.free, m.start, m.goal, 1.0);
            assert_eq!(got.map(|p| p.hops), m.expected_hops, "{}", m.id);
            match (got, m.expected_length) {
                (Some(p), Some(l)) => assert!((p.length - l).abs() < 1e-9, "{}: {} vs {l}", m.id, p.length),
                (None, None) => {}
                other => panic!("{}: {other:?}", m.id),
            }
        }
    }
}
