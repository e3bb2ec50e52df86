use std::path::Path;

use mopa::evaluation::{
    aggregate, failure_counts, goal_discovery_report, run_means, run_suite, summary_csv, to_jsonl, EpisodeResult, MetricsSummary,
};
use mopa::exploration::Strategy;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::dataset::{self, write_file, Dataset};
use crate::error::CliError;

fn pretty(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

/// Runs every repetition of `cfg` on `data`.
pub fn run_all(cfg: &RunConfig, data: &Dataset) -> Result<Vec<Vec<EpisodeResult>>, CliError> {
    (0..cfg.runs)
        .map(|r| {
            run_suite(&data.scenes, &data.episodes, &cfg.agent, cfg.run_seed + r as u64, r)
                .map_err(|e| CliError::Runtime(e.to_string()))
        })
        .collect()
}

/// Writes per-run JSONL and summaries plus the cross-run summary,
/// failure counts, goal discovery report and the config echo.
pub fn write_outputs(cfg: &RunConfig, runs: &[Vec<EpisodeResult>], out: &Path) -> Result<MetricsSummary, CliError> {
    write_file(&out.join("config.json"), cfg.to_json().as_bytes())?;
    for (r, results) in runs.iter().enumerate() {
        let jsonl = to_jsonl(results).map_err(|e| CliError::Runtime(e.to_string()))?;
        write_file(&out.join(format!("results/run_{r}.jsonl")), jsonl.as_bytes())?;
        write_file(&out.join(format!("results/run_{r}_summary.json")), pretty(&run_means(results)).as_bytes())?;
    }
    let summary = aggregate(runs).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_file(&out.join("summary.json"), pretty(&summary).as_bytes())?;
    let csv = summary_csv(&summary).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_file(&out.join("summary.csv"), csv.as_bytes())?;
    let all: Vec<EpisodeResult> = runs.iter().flatten().cloned().collect();
    write_file(&out.join("failures.json"), pretty(&failure_counts(&all)).as_bytes())?;
    write_file(&out.join("discovery.json"), pretty(&goal_discovery_report(&all)).as_bytes())?;
    Ok(summary)
}

/// `run`: one output tree per strategy (the config's own when none given).
pub fn cmd_run(cfg: &RunConfig, strategies: &[Strategy]) -> Result<Vec<(Option<Strategy>, MetricsSummary)>, CliError> {
    let data = dataset::load(&cfg.dataset_dir(), &cfg.splits)?;
    let out = cfg.output_dir();
    let variants: Vec<Option<Strategy>> = if strategies.is_empty() { vec![None] } else { strategies.iter().copied().map(Some).collect() };
    let mut summaries = Vec::new();
    for v in variants {
        let mut c = cfg.clone();
        let dir = match v {
            None => out.clone(),
            Some(s) => {
                c.agent.exploration.strategy = s;
                if strategies.len() > 1 {
                    out.join(strategy_name(s))
                } else {
                    out.clone()
                }
            }
        };
        c.validate()?;
        let runs = run_all(&c, &data)?;
        summaries.push((v, write_outputs(&c, &runs, &dir)?));
    }
    Ok(summaries)
}

pub fn strategy_name(s: Strategy) -> String {
    serde_json::to_value(s).ok().and_then(|v| v.as_str().map(str::to_string)).expect("unit variant")
}

/// Sweepable parameters and their location in the config JSON.
pub const SWEEP_PARAMS: [(&str, &str); 16] = [
    ("strategy", "/agent/exploration/strategy"),
    ("alpha_exp", "/agent/exploration/alpha_exp"),
    ("l_r", "/agent/exploration/l_r"),
    ("l_s", "/agent/exploration/l_s"),
    ("frontier_offset", "/agent/exploration/frontier_offset"),
    ("reach_radius", "/agent/exploration/reach_radius"),
    ("backend", "/agent/navigation/backend"),
    ("dilation_radius", "/agent/navigation/dilation_radius"),
    ("replan_every", "/agent/navigation/replan_every"),
    ("found_trigger_distance", "/agent/navigation/found_trigger_distance"),
    ("perception", "/agent/perception"),
    ("confidence_threshold", "/agent/detector/confidence_threshold"),
    ("k_neighbors", "/agent/detector/k_neighbors"),
    ("knn_accept_fraction", "/agent/detector/knn_accept_fraction"),
    ("miss_rate", "/agent/detector/miss_rate"),
    ("misclass_rate", "/agent/detector/misclass_rate"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub name: String,
    pub pointer: &'static str,
    pub values: Vec<Value>,
}

/// Parses `name=v1,v2,...`. Numbers stay numbers, anything else is a string.
pub fn parse_axis(spec: &str) -> Result<SweepAxis, CliError> {
    let (name, list) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("sweep parameter {spec:?} is not name=v1,v2,...")))?;
    let name = name.trim();
    let pointer = SWEEP_PARAMS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, p)| *p)
        .ok_or_else(|| {
            let known: Vec<&str> = SWEEP_PARAMS.iter().map(|(n, _)| *n).collect();
            CliError::Config(format!("unknown sweep parameter {name:?}; known: {}", known.join(", ")))
        })?;
    let values: Vec<Value> = list
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string())))
        .collect();
    if values.is_empty() {
        return Err(CliError::Config(format!("sweep parameter {name} has no values")));
    }
    Ok(SweepAxis {
        name: name.to_string(),
        pointer,
        values,
    })
}

/// Cartesian product of the axes, first axis varying slowest.
pub fn grid_points(axes: &[SweepAxis]) -> Vec<Vec<Value>> {
    let mut points = vec![Vec::new()];
    for axis in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(v.clone());
                    q
                })
            })
            .collect();
    }
    points
}

pub fn apply_point(cfg: &RunConfig, axes: &[SweepAxis], point: &[Value]) -> Result<RunConfig, CliError> {
    let mut v = serde_json::to_value(cfg).expect("config serializes");
    for (axis, value) in axes.iter().zip(point) {
        *v.pointer_mut(axis.pointer).expect("declared pointer exists") = value.clone();
    }
    let c: RunConfig = serde_json::from_value(v).map_err(|e| CliError::Config(format!("sweep point {point:?}: {e}")))?;
    c.validate()?;
    Ok(c)
}

/// `sweep`: one summary row per grid point.
pub fn cmd_sweep(cfg: &RunConfig, specs: &[String]) -> Result<Vec<Value>, CliError> {
    if specs.is_empty() {
        return Err(CliError::Config("empty sweep grid: give at least one --param".into()));
    }
    let axes = specs.iter().map(|s| parse_axis(s)).collect::<Result<Vec<_>, _>>()?;
    let points = grid_points(&axes);
    let configs = points.iter().map(|p| apply_point(cfg, &axes, p)).collect::<Result<Vec<_>, _>>()?;
    let data = dataset::load(&cfg.dataset_dir(), &cfg.splits)?;
    let out = cfg.output_dir();
    write_file(&out.join("config.json"), cfg.to_json().as_bytes())?;
    let mut rows = Vec::new();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = vec!["point".into()];
    header.extend(axes.iter().map(|a| a.name.clone()));
    for m in ["success", "progress", "spl", "ppl"] {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_std"));
    }
    w.write_record(&header).map_err(|e| CliError::Runtime(e.to_string()))?;
    for (i, (point, c)) in points.iter().zip(&configs).enumerate() {
        let runs = run_all(c, &data)?;
        let s = write_outputs(c, &runs, &out.join(format!("points/{i:03}")))?;
        let mut record = vec![i.to_string()];
        record.extend(point.iter().map(|v| v.as_str().map_or_else(|| v.to_string(), str::to_string)));
        for m in [s.success, s.progress, s.spl, s.ppl] {
            record.push(format!("{:.6}", m.mean));
            record.push(format!("{:.6}", m.std));
        }
        w.write_record(&record).map_err(|e| CliError::Runtime(e.to_string()))?;
        let params: serde_json::Map<String, Value> = axes.iter().zip(point).map(|(a, v)| (a.name.clone(), v.clone())).collect();
        rows.push(json!({"point": i, "params": params, "summary": s}));
    }
    let bytes = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
    write_file(&out.join("sweep.csv"), &bytes)?;
    write_file(&out.join("sweep.json"), pretty(&rows).as_bytes())?;
    Ok(rows)
}
