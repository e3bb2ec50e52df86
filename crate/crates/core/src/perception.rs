//! Simulated object detector.
//!
//! The ground-truth visible-object list from the simulator is degraded into
//! detections: oracle mode passes it through, cylinder mode perturbs the
//! sampled surface color and labels it with a k-nearest-neighbour color
//! classifier, natural mode drops and mislabels detections at configured
//! rates. Every non-oracle detection draws a confidence score and is
//! suppressed below the threshold.

use std::io::Read;
use std::path::Path;

use rand::Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{ObjectCategory, Observation, NUM_CATEGORIES};

#[derive(Debug, Error)]
pub enum PerceptionError {
    #[error("invalid detector config: {0}")]
    InvalidConfig(String),
    #[error("prototype set: {0}")]
    Prototypes(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerceptionMode {
    Oracle,
    Cylinder,
    Natural,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub confidence_threshold: f64,
    pub k_neighbors: usize,
    pub knn_accept_fraction: f64,
    /// Per-channel standard deviation of the sampled RGB value.
    pub color_noise_sigma: f64,
    pub miss_rate: f64,
    pub misclass_rate: f64,
    pub range_max: f64,
    /// Beta(alpha, beta) confidence score of true detections.
    pub confidence_alpha: f64,
    pub confidence_beta: f64,
    /// Per-frame chance of a phantom detection of a random category.
    pub phantom_rate: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            confidence_threshold: 0.95,
            k_neighbors: 10,
            knn_accept_fraction: 0.8,
            color_noise_sigma: 12.0,
            miss_rate: 0.05,
            misclass_rate: 0.05,
            range_max: 5.0,
            confidence_alpha: 60.0,
            confidence_beta: 1.0,
            phantom_rate: 0.0,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), PerceptionError> {
        let probs = [
            ("confidence_threshold", self.confidence_threshold),
            ("knn_accept_fraction", self.knn_accept_fraction),
            ("miss_rate", self.miss_rate),
            ("misclass_rate", self.misclass_rate),
            ("phantom_rate", self.phantom_rate),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(PerceptionError::InvalidConfig(format!("{name} = {p} is not a probability")));
            }
        }
        if self.k_neighbors == 0 {
            return Err(PerceptionError::InvalidConfig("k_neighbors must be >= 1".into()));
        }
        if !(self.confidence_alpha > 0.0 && self.confidence_beta > 0.0) {
            return Err(PerceptionError::InvalidConfig("confidence Beta parameters must be positive".into()));
        }
        if !(self.color_noise_sigma >= 0.0 && self.range_max > 0.0) {
            return Err(PerceptionError::InvalidConfig("noise sigma must be >= 0 and range_max > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub category: ObjectCategory,
    pub confidence: f64,
    pub range: f64,
    pub bearing: f64,
}

/// Labelled RGB samples for the color classifier, in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorPrototypeSet {
    samples: Vec<(ObjectCategory, [f64; 3])>,
}

#[derive(Debug, Deserialize)]
struct PrototypeRow {
    label: String,
    r: f64,
    g: f64,
    b: f64,
}

impl ColorPrototypeSet {
    /// Every class that appears must have at least `k` samples.
    pub fn new(samples: Vec<(ObjectCategory, [f64; 3])>, k: usize) -> Result<Self, PerceptionError> {
        if samples.is_empty() {
            return Err(PerceptionError::Prototypes("no samples".into()));
        }
        let mut counts = [0usize; NUM_CATEGORIES];
        for (c, _) in &samples {
            counts[c.index()] += 1;
        }
        for (i, &n) in counts.iter().enumerate() {
            if n > 0 && n < k {
                let c = ObjectCategory::from_index(i).expect("index in range");
                return Err(PerceptionError::Prototypes(format!("class {c} has {n} < {k} samples")));
            }
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[(ObjectCategory, [f64; 3])] {
        &self.samples
    }

    /// `per_class` samples for each category spread deterministically around
    /// its canonical color on a small lattice of offsets.
    pub fn canonical(per_class: usize) -> Self {
        let mut samples = Vec::with_capacity(per_class * NUM_CATEGORIES);
        for c in ObjectCategory::ALL {
            let base = c.rgb().map(f64::from);
            for i in 0..per_class {
                let o = [(i % 3) as f64 - 1.0, ((i / 3) % 3) as f64 - 1.0, ((i / 9) % 3) as f64 - 1.0];
                let rgb = [0, 1, 2].map(|ch| (base[ch] + 6.0 * o[ch]).clamp(0.0, 255.0));
                samples.push((c, rgb));
            }
        }
        Self { samples }
    }

    /// Reads `label,r,g,b` rows (with header).
    pub fn from_csv_reader(reader: impl Read, k: usize) -> Result<Self, PerceptionError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut samples = Vec::new();
        for row in rdr.deserialize::<PrototypeRow>() {
            let row = row?;
            let label: ObjectCategory = row.label.parse().map_err(PerceptionError::Prototypes)?;
            samples.push((label, [row.r, row.g, row.b]));
        }
        Self::new(samples, k)
    }

    pub fn from_csv_path(path: &Path, k: usize) -> Result<Self, PerceptionError> {
        Self::from_csv_reader(std::fs::File::open(path)?, k)
    }
}

/// Majority vote over the `k` prototypes nearest to `sample` (Euclidean RGB,
/// distance ties by insertion order). Accepts the modal label only when it
/// is unique and holds at least `ceil(accept_fraction * k)` votes.
pub fn knn_color(sample: [f64; 3], prototypes: &ColorPrototypeSet, k: usize, accept_fraction: f64) -> Option<ObjectCategory> {
    let mut ranked: Vec<(f64, usize)> = prototypes
        .samples
        .iter()
        .enumerate()
        .map(|(i, (_, rgb))| {
            let d2 = (0..3).map(|ch| (rgb[ch] - sample[ch]).powi(2)).sum::<f64>();
            (d2, i)
        })
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let k = k.min(ranked.len());
    let mut votes = [0usize; NUM_CATEGORIES];
    for &(_, i) in &ranked[..k] {
        votes[prototypes.samples[i].0.index()] += 1;
    }
    let best = *votes.iter().max()?;
    if votes.iter().filter(|&&v| v == best).count() > 1 {
        return None;
    }
    let needed = (accept_fraction * k as f64 - 1e-9).ceil() as usize;
    if best < needed {
        return None;
    }
    ObjectCategory::from_index(votes.iter().position(|&v| v == best)?)
}

/// Converts the visible-object list of one observation into detections.
pub fn detect<R: Rng + ?Sized>(
    obs: &Observation,
    cfg: &DetectorConfig,
    mode: PerceptionMode,
    prototypes: &ColorPrototypeSet,
    fov: f64,
    rng: &mut R,
) -> Vec<Detection> {
    if mode == PerceptionMode::Oracle {
        return obs
            .visible_objects
            .iter()
            .map(|v| Detection {
                category: v.category,
                confidence: 1.0,
                range: v.range,
                bearing: v.bearing,
            })
            .collect();
    }
    let beta = Beta::new(cfg.confidence_alpha, cfg.confidence_beta).expect("validated Beta parameters");
    let noise = Normal::new(0.0, cfg.color_noise_sigma.max(0.0)).expect("finite sigma");
    let mut out = Vec::new();
    for v in obs.visible_objects.iter().filter(|v| v.range <= cfg.range_max) {
        let label = match mode {
            PerceptionMode::Cylinder => {
                let sample = v.color.map(|c| {
                    let jitter = if cfg.color_noise_sigma > 0.0 { noise.sample(rng) } else { 0.0 };
                    (f64::from(c) + jitter).clamp(0.0, 255.0)
                });
                knn_color(sample, prototypes, cfg.k_neighbors, cfg.knn_accept_fraction)
            }
            PerceptionMode::Natural => {
                if rng.random_bool(cfg.miss_rate) {
                    None
                } else if rng.random_bool(cfg.misclass_rate) {
                    let shift = rng.random_range(1..NUM_CATEGORIES);
                    ObjectCategory::from_index((v.category.index() + shift) % NUM_CATEGORIES)
                } else {
                    Some(v.category)
                }
            }
            PerceptionMode::Oracle => unreachable!(),
        };
        let confidence = beta.sample(rng);
        if let Some(category) = label {
            if confidence >= cfg.confidence_threshold {
                out.push(Detection {
                    category,
                    confidence,
                    range: v.range,
                    bearing: v.bearing,
                });
            }
        }
    }
    if cfg.phantom_rate > 0.0 && rng.random_bool(cfg.phantom_rate) {
        let confidence = beta.sample(rng);
        if confidence >= cfg.confidence_threshold {
            out.push(Detection {
                category: ObjectCategory::from_index(rng.random_range(0..NUM_CATEGORIES)).expect("in range"),
                confidence,
                range: rng.random_range(0.5..cfg.range_max.max(0.6)),
                bearing: rng.random_range(-fov / 2.0..=fov / 2.0),
            });
        }
    }
    out
}
