use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A frozen expected output: `digest` is the SHA-256 of the canonical
/// serialization produced from `input`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenCase {
    pub id: String,
    pub input: serde_json::Value,
    pub digest: String,
    #[serde(default)]
    pub tolerance: Option<f64>,
}

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join("v1")
}

pub fn load_golden_cases() -> Vec<GoldenCase> {
    let path = data_dir().join("golden.json");
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()));
    serde_json::from_str(&text).expect("golden.json is well-formed")
}

pub fn golden_case(id: &str) -> GoldenCase {
    load_golden_cases()
        .into_iter()
        .find(|c| c.id == id)
        .unwrap_or_else(|| panic!("no golden case {id}"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
