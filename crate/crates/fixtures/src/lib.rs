//! Reference oracles and golden fixtures for the mopa test suites.
//!
//! Nothing here depends on the `mopa` crate: masks are plain row vectors
//! and every oracle is an independent, deliberately slow implementation.

pub mod golden;
pub mod knn;
pub mod micromap;
pub mod montecarlo;
pub mod oracle;

pub use golden::{sha256_hex, GoldenCase};
pub use knn::{load_knn_cases, KnnCase};
pub use micromap::MicroMap;
pub use montecarlo::RateEstimate;
pub use oracle::{brute_supercover, oracle_dijkstra, OraclePath};
