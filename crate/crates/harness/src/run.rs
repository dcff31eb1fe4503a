//! Run-matrix expansion, cell execution and result files.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use darling_core::mdp::{run_agent, RunOptions, RunTrace};
use darling_core::SimRng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::build::{build_agent, build_env};
use crate::config::{AlgorithmSpec, EnvEntry, ExperimentConfig, Protocol};
use crate::summary::{aggregate, write_summary, CellFinal, SummaryRow};
use crate::{derive_seed, HarnessError};

pub const RESULT_COLUMNS: [&str; 15] = [
    "run_id",
    "seed",
    "algorithm",
    "env",
    "protocol",
    "xi_or_drift",
    "t",
    "episode_reward",
    "cum_reward",
    "cum_regret",
    "probe_flag",
    "restart_flag",
    "restart_count",
    "detector_triggers_this_episode",
    "wall_ns",
];

/// One line of `results.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub run_id: String,
    pub seed: u64,
    pub algorithm: String,
    pub env: String,
    pub protocol: String,
    pub xi_or_drift: String,
    pub t: usize,
    pub episode_reward: f64,
    pub cum_reward: f64,
    pub cum_regret: f64,
    pub probe_flag: u8,
    pub restart_flag: u8,
    pub restart_count: usize,
    pub detector_triggers_this_episode: usize,
    pub wall_ns: u64,
}

/// One (env, protocol, algorithm, seed) combination.
#[derive(Clone, Debug)]
pub struct Cell {
    pub env: EnvEntry,
    pub protocol_index: usize,
    pub protocol: Protocol,
    pub algo: AlgorithmSpec,
    pub seed: u64,
}

impl Cell {
    pub fn run_id(&self) -> String {
        format!(
            "{}_{}{}_{}_s{}",
            self.env.label(),
            self.protocol.label(),
            self.protocol_index,
            self.algo.label(),
            self.seed
        )
    }

    fn env_key(&self) -> String {
        format!("{}_{}{}", self.env.label(), self.protocol.label(), self.protocol_index)
    }

    /// Change points, hard-instance draws and environment noise. Shared by every
    /// algorithm at the same seed.
    pub fn env_seeds(&self) -> (u64, u64) {
        let key = self.env_key();
        (derive_seed(&["env-build", &key], self.seed), derive_seed(&["env-sim", &key], self.seed))
    }

    pub fn agent_seed(&self) -> u64 {
        derive_seed(&[&self.run_id()], self.seed)
    }
}

/// Cells in matrix order: env, then protocol, then algorithm, then seed.
pub fn expand(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut cells = Vec::new();
    for env in &cfg.envs {
        for (pi, protocol) in cfg.protocols.iter().enumerate() {
            for algo in &cfg.algorithms {
                for &seed in &cfg.seeds {
                    cells.push(Cell {
                        env: env.clone(),
                        protocol_index: pi,
                        protocol: protocol.clone(),
                        algo: algo.clone(),
                        seed,
                    });
                }
            }
        }
    }
    cells
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum CellStatus {
    Ok,
    Failed { error: String },
}

#[derive(Clone, Debug, Serialize)]
pub struct CellOutcome {
    pub run_id: String,
    pub env: String,
    pub protocol: String,
    pub xi_or_drift: String,
    pub algorithm: String,
    pub seed: u64,
    pub env_seeds: (u64, u64),
    pub agent_seed: u64,
    pub change_points: usize,
    /// `optimal_values` calls made by the regret oracle.
    pub oracle_solves: usize,
    /// The oracle solved every distinct model it met.
    pub oracle_exact: bool,
    pub final_cum_reward: f64,
    pub final_cum_regret: f64,
    pub wall_ms_per_episode: f64,
    pub restarts: usize,
    #[serde(flatten)]
    pub status: CellStatus,
}

impl CellOutcome {
    pub fn is_ok(&self) -> bool {
        self.status == CellStatus::Ok
    }

    pub fn to_final(&self) -> CellFinal {
        CellFinal {
            env: self.env.clone(),
            protocol: self.protocol.clone(),
            xi_or_drift: self.xi_or_drift.clone(),
            algorithm: self.algorithm.clone(),
            seed: self.seed,
            cum_reward: self.final_cum_reward,
            cum_regret: self.final_cum_regret,
            wall_ms_per_episode: self.wall_ms_per_episode,
            restarts: self.restarts as f64,
            oracle_exact: Some(self.oracle_exact),
        }
    }
}

/// Runs one cell in memory.
pub fn run_cell(cfg: &ExperimentConfig, cell: &Cell) -> Result<(RunTrace, CellOutcome), HarnessError> {
    let (build_seed, sim_seed) = cell.env_seeds();
    let built = build_env(&cell.env, &cell.protocol, cfg.episodes, &mut SimRng::seed_from_u64(build_seed))?;
    let detector = cfg.detector.resolve(cfg.episodes);
    let mut agent = build_agent(&cell.algo, &built, cfg.episodes, detector, || built.probes())?;
    let opts = RunOptions {
        episodes: cfg.episodes,
        regret_mode: cfg.regret_mode,
        timing: cfg.timing,
    };
    let mut env_rng = SimRng::seed_from_u64(sim_seed);
    let mut agent_rng = SimRng::seed_from_u64(cell.agent_seed());
    let trace = run_agent(built.env.as_ref(), agent.as_mut(), &opts, &mut env_rng, &mut agent_rng)?;
    let expected_solves = built.env.distinct_models().min(cfg.episodes);
    let outcome = CellOutcome {
        run_id: cell.run_id(),
        env: cell.env.label(),
        protocol: cell.protocol.label().into(),
        xi_or_drift: cell.protocol.xi_or_drift(),
        algorithm: cell.algo.label(),
        seed: cell.seed,
        env_seeds: (build_seed, sim_seed),
        agent_seed: cell.agent_seed(),
        change_points: built.change_points.len(),
        oracle_solves: trace.oracle_solves,
        oracle_exact: trace.oracle_solves >= expected_solves,
        final_cum_reward: trace.final_cum_reward(),
        final_cum_regret: trace.final_cum_regret(),
        wall_ms_per_episode: trace.mean_wall_ms(),
        restarts: trace.restarts(),
        status: CellStatus::Ok,
    };
    Ok((trace, outcome))
}

pub fn rows<'a>(trace: &'a RunTrace, o: &CellOutcome) -> impl Iterator<Item = ResultRow> + 'a {
    let o = o.clone();
    trace.records.iter().map(move |r| ResultRow {
        run_id: o.run_id.clone(),
        seed: o.seed,
        algorithm: o.algorithm.clone(),
        env: o.env.clone(),
        protocol: o.protocol.clone(),
        xi_or_drift: o.xi_or_drift.clone(),
        t: r.t,
        episode_reward: r.reward,
        cum_reward: r.cum_reward,
        cum_regret: r.cum_regret,
        probe_flag: r.probe as u8,
        restart_flag: r.restart.is_some() as u8,
        restart_count: r.restart_count,
        detector_triggers_this_episode: r.triggers,
        wall_ns: r.wall_ns,
    })
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, HarnessError> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .has_headers(true)
        .from_writer(BufWriter::new(file)))
}

fn write_cell_file(path: &Path, trace: &RunTrace, o: &CellOutcome) -> Result<(), HarnessError> {
    let mut w = csv_writer(path)?;
    for row in rows(trace, o) {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}

fn failed(cell: &Cell, err: &HarnessError) -> CellOutcome {
    CellOutcome {
        run_id: cell.run_id(),
        env: cell.env.label(),
        protocol: cell.protocol.label().into(),
        xi_or_drift: cell.protocol.xi_or_drift(),
        algorithm: cell.algo.label(),
        seed: cell.seed,
        env_seeds: cell.env_seeds(),
        agent_seed: cell.agent_seed(),
        change_points: 0,
        oracle_solves: 0,
        oracle_exact: false,
        final_cum_reward: f64::NAN,
        final_cum_regret: f64::NAN,
        wall_ms_per_episode: f64::NAN,
        restarts: 0,
        status: CellStatus::Failed { error: err.to_string() },
    }
}

/// What a finished experiment produced.
#[derive(Debug)]
pub struct RunReport {
    pub cells: Vec<CellOutcome>,
    pub summary: Vec<SummaryRow>,
    pub results: PathBuf,
}

impl RunReport {
    pub fn failed(&self) -> Vec<&CellOutcome> {
        self.cells.iter().filter(|c| !c.is_ok()).collect()
    }
}

#[derive(Serialize)]
struct Provenance<'a> {
    tool: &'static str,
    version: &'static str,
    regret_mode: &'static str,
    timing: bool,
    seed_derivation: &'static str,
    config: &'a ExperimentConfig,
    cells: &'a [CellOutcome],
}

/// Validates, runs every cell on up to `cfg.threads` threads, merges the cell
/// files in matrix order and writes the summary and provenance.
///
/// Config problems (including environments that cannot be built) are errors;
/// a cell that fails while running is recorded and the rest go on.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport, HarnessError> {
    cfg.validate()?;
    let cells = expand(cfg);
    // build every environment once up front so config mistakes surface as such
    for cell in cells.iter().filter(|c| c.algo == cfg.algorithms[0] && c.seed == cfg.seeds[0]) {
        let (build_seed, _) = cell.env_seeds();
        build_env(&cell.env, &cell.protocol, cfg.episodes, &mut SimRng::seed_from_u64(build_seed))
            .map_err(|e| HarnessError::Config(format!("{}: {e}", cell.env_key())))?;
    }

    let out = &cfg.out_dir;
    let cell_dir = out.join("cells");
    fs::create_dir_all(&cell_dir).map_err(|e| HarnessError::io(&cell_dir, e))?;

    let slots: Mutex<Vec<Option<CellOutcome>>> = Mutex::new(vec![None; cells.len()]);
    let next = AtomicUsize::new(0);
    let work = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(cell) = cells.get(i) else { break };
        let path = cell_dir.join(format!("{}.csv", cell.run_id()));
        let outcome = match run_cell(cfg, cell).and_then(|(trace, o)| write_cell_file(&path, &trace, &o).map(|_| o)) {
            Ok(o) => o,
            Err(e) => failed(cell, &e),
        };
        slots.lock().unwrap()[i] = Some(outcome);
    };
    std::thread::scope(|s| {
        for _ in 0..cfg.threads.min(cells.len()) {
            s.spawn(work);
        }
    });
    let outcomes: Vec<CellOutcome> = slots.into_inner().unwrap().into_iter().map(|o| o.unwrap()).collect();

    let results = out.join("results.csv");
    merge(&results, outcomes.iter().filter(|o| o.is_ok()).map(|o| cell_dir.join(format!("{}.csv", o.run_id))))?;

    let finals: Vec<CellFinal> = outcomes.iter().filter(|o| o.is_ok()).map(CellOutcome::to_final).collect();
    let summary = aggregate(&finals);
    let failed: Vec<String> = outcomes
        .iter()
        .filter_map(|o| match &o.status {
            CellStatus::Failed { error } => Some(format!("{}: {error}", o.run_id)),
            CellStatus::Ok => None,
        })
        .collect();
    write_summary(out, &summary, &failed)?;

    let prov = Provenance {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        regret_mode: cfg.regret_mode.as_str(),
        timing: cfg.timing,
        seed_derivation: "first 8 bytes LE of sha256(parts joined by NUL, NUL, seed LE); \
                          env parts [env-build|env-sim, <env>_<protocol><index>], agent parts [run_id]",
        config: cfg,
        cells: &outcomes,
    };
    let prov_path = out.join("provenance.json");
    let text = serde_json::to_string_pretty(&prov)?;
    fs::write(&prov_path, text + "\n").map_err(|e| HarnessError::io(&prov_path, e))?;

    Ok(RunReport { cells: outcomes, summary, results })
}

/// Concatenates cell files under one header.
fn merge(dest: &Path, parts: impl Iterator<Item = PathBuf>) -> Result<(), HarnessError> {
    let file = File::create(dest).map_err(|e| HarnessError::io(dest, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| HarnessError::io(dest, e);
    writeln!(w, "{}", RESULT_COLUMNS.join(",")).map_err(io)?;
    for part in parts {
        let f = File::open(&part).map_err(|e| HarnessError::io(&part, e))?;
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| HarnessError::io(&part, e))?;
            if i > 0 {
                writeln!(w, "{line}").map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)?;
    Ok(())
}
