//! Config-driven experiment runner: expands env x protocol x algorithm x seed,
//! runs every cell, and writes per-episode CSVs, a summary and a provenance file.

pub mod build;
pub mod config;
pub mod run;
pub mod summary;

use std::path::PathBuf;

use sha2::{Digest, Sha256};

pub use build::{build_agent, build_env, BuiltEnv};
pub use config::{AlgorithmSpec, DetectorProfile, EnvEntry, ExperimentConfig, LearnerSpec, Overrides, Protocol, Wrapper};
pub use run::{expand, run_cell, run_experiment, Cell, CellOutcome, CellStatus, ResultRow, RunReport, RESULT_COLUMNS};
pub use summary::{aggregate, read_results, summarize_files, write_summary, CellFinal, SummaryRow};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] darling_core::envs::EnvError),
    #[error(transparent)]
    Mdp(#[from] darling_core::mdp::MdpError),
    #[error(transparent)]
    Darling(#[from] darling_core::darling::DarlingError),
    #[error(transparent)]
    Detector(#[from] darling_core::detectors::DetectorError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Schema(String),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }
}

/// First eight bytes (little endian) of `sha256(part_0 \0 part_1 \0 ... \0 seed_le)`.
pub fn derive_seed(parts: &[&str], seed: u64) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0u8]);
    }
    h.update(seed.to_le_bytes());
    let digest = h.finalize();
    let mut out = [0u8; 8];
    out.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(out)
}
