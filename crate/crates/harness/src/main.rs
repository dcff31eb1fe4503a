use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use darling_core::mdp::RegretMode;
use darling_harness::summary::render_table;
use darling_harness::{run_experiment, summarize_files, write_summary, ExperimentConfig, HarnessError, Overrides};

#[derive(Parser)]
#[command(name = "darling", version, about = "Run DARLING experiments and summarize their results")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the env x protocol x algorithm x seed matrix of a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Keep only these algorithm labels (comma-separated).
        #[arg(long, value_delimiter = ',')]
        algo: Option<Vec<String>>,
        /// Keep only these environment labels (comma-separated).
        #[arg(long, value_delimiter = ',')]
        env: Option<Vec<String>>,
        /// Replace the protocols with one geometric protocol of this exponent.
        #[arg(long)]
        xi: Option<f64>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, value_parser = parse_mode)]
        regret_mode: Option<RegretMode>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Aggregate result CSVs, including external baselines in the same schema.
    Summarize {
        /// Result files to merge, keyed by algorithm name.
        #[arg(long = "in", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_mode(s: &str) -> Result<RegretMode, String> {
    match s {
        "expected" => Ok(RegretMode::Expected),
        "realized" => Ok(RegretMode::Realized),
        _ => Err(format!("expected `expected` or `realized`, got {s:?}")),
    }
}

const CONFIG_ERROR: u8 = 2;
const PARTIAL_FAILURE: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = e.downcast_ref::<HarnessError>().is_some_and(|h| matches!(h, HarnessError::Config(_)));
            ExitCode::from(if config { CONFIG_ERROR } else { 1 })
        }
    }
}

fn dispatch(cmd: Cmd) -> anyhow::Result<u8> {
    match cmd {
        Cmd::Run { config, out, seeds, algo, env, xi, episodes, regret_mode, threads } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.apply(&Overrides { out, seeds, algos: algo, envs: env, xi, episodes, regret_mode, threads })?;
            let report = run_experiment(&cfg)?;
            print!("{}", std::fs::read_to_string(cfg.out_dir.join("summary.txt")).unwrap_or_default());
            println!("results: {}", report.results.display());
            let failed = report.failed();
            if failed.is_empty() {
                Ok(0)
            } else {
                eprintln!("{} of {} cells failed", failed.len(), report.cells.len());
                Ok(PARTIAL_FAILURE)
            }
        }
        Cmd::Summarize { inputs, out } => {
            let rows = summarize_files(&inputs).context("reading result files")?;
            write_summary(&out, &rows, &[])?;
            print!("{}", render_table(&rows, &[]));
            Ok(0)
        }
    }
}
