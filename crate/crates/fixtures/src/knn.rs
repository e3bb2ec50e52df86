use serde::Deserialize;

use crate::golden::data_dir;

/// One hand-built color classification case. Prototypes are
/// `[label, r, g, b]` rows in insertion order; `expected` is `None` when the
/// classifier must reject.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct KnnCase {
    pub id: String,
    pub k: usize,
    pub accept_fraction: f64,
    pub sample: [f64; 3],
    pub prototypes: Vec<(String, f64, f64, f64)>,
    pub expected: Option<String>,
}

pub fn load_knn_cases() -> Vec<KnnCase> {
    let path = data_dir().join("knn_cases.json");
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()));
    serde_json::from_str(&text).expect("knn_cases.json is well-formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thirty_cases_with_both_boundaries() {
        let cases = load_knn_cases();
        assert_eq!(cases.len(), 30);
        let ids: Vec<&str> = cases.iter().map(|c| c.id.as_str()).collect();
        assert!(ids.contains(&"eight_of_ten_accept") && ids.contains(&"seven_of_ten_reject"));
    }
}
