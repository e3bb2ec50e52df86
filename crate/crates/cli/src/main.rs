//! `mopa` command-line driver: dataset generation, runs, sweeps, renders
//! and validation. Exit codes: 0 ok, 2 config, 3 data, 4 runtime.

mod config;
mod dataset;
mod error;
mod experiment;
mod render;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mopa::evaluation::from_jsonl;
use mopa::exploration::Strategy;

use crate::config::RunConfig;
use crate::dataset::write_file;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "mopa", version, about = "Multi-object navigation experiments on generated 2D scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `dataset_dir` from the config.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Worker threads for episode execution.
    #[arg(long, env = "MOPA_JOBS")]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate scenes and episodes with a manifest.
    Gen(Common),
    /// Run the agent over the dataset and write results and summaries.
    Run {
        #[command(flatten)]
        common: Common,
        /// Exploration strategy; repeat for an ablation (one output tree each).
        #[arg(long, value_parser = parse_strategy)]
        strategy: Vec<Strategy>,
    },
    /// Run a grid over declared parameters, e.g. `--param frontier_offset=1,2,3`.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long = "param")]
        params: Vec<String>,
    },
    /// Render one episode result as SVG.
    Render {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        episode: PathBuf,
        /// JSON-lines results containing the episode.
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a config and/or a dataset.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| "expected uniform, uniform_no_failsafe, stubborn or frontier".to_string())
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(d) = &common.dataset {
        cfg.dataset_dir = Some(d.clone());
    }
    if let Some(j) = common.jobs {
        if j == 0 {
            return Err(CliError::Config("--jobs must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen(common) => {
            let cfg = load(&common)?;
            let dir = cfg.dataset_dir();
            let m = dataset::generate(&cfg, &dir)?;
            write_file(&dir.join("config.json"), cfg.to_json().as_bytes())?;
            println!("{} scenes, {} episodes -> {}", m.scenes.len(), m.episodes, dir.display());
        }
        Command::Run { common, strategy } => {
            let cfg = load(&common)?;
            for (s, summary) in experiment::cmd_run(&cfg, &strategy)? {
                let label = s.map_or_else(|| experiment::strategy_name(cfg.agent.exploration.strategy), experiment::strategy_name);
                println!(
                    "{label}: success {:.3} ± {:.3}, progress {:.3} ± {:.3}, spl {:.3}, ppl {:.3} over {} runs",
                    summary.success.mean, summary.success.std, summary.progress.mean, summary.progress.std, summary.spl.mean, summary.ppl.mean, summary.runs
                );
            }
            println!("results in {}", cfg.output_dir().display());
        }
        Command::Sweep { common, params } => {
            let cfg = load(&common)?;
            let rows = experiment::cmd_sweep(&cfg, &params)?;
            println!("{} grid points -> {}", rows.len(), cfg.output_dir().join("sweep.csv").display());
        }
        Command::Render { scene, episode, results, out } => {
            let scene = dataset::load_scene(&scene)?;
            let episode = dataset::load_episode(&episode)?;
            let text = std::fs::read_to_string(&results).map_err(|e| CliError::Data(format!("{}: {e}", results.display())))?;
            let all = from_jsonl(&text).map_err(|e| CliError::Data(format!("{}: {e}", results.display())))?;
            let result = all
                .iter()
                .find(|r| r.episode_id == episode.id)
                .ok_or_else(|| CliError::Data(format!("no result for episode {} in {}", episode.id, results.display())))?;
            let svg = render::render(&scene, &episode, result)?;
            write_file(&out, svg.as_bytes())?;
            println!("wrote {}", out.display());
        }
        Command::Validate { config, dataset } => {
            if config.is_none() && dataset.is_none() {
                return Err(CliError::Config("give --config and/or --dataset".into()));
            }
            if let Some(c) = &config {
                RunConfig::load(c)?;
                println!("config ok: {}", c.display());
            }
            if let Some(d) = &dataset {
                let (n, problems) = dataset::validate(d)?;
                for p in &problems {
                    eprintln!("{p}");
                }
                if !problems.is_empty() {
                    return Err(CliError::Data(format!("{} problems in {n} episodes", problems.len())));
                }
                println!("dataset ok: {n} episodes");
            }
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = execute(Cli::parse()) {
        eprintln!("mopa: {e}");
        std::process::exit(e.exit_code());
    }
}
