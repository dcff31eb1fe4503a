//! Episodic MDPs, exact values and dynamic-regret accounting.

mod environment;
mod features;
mod regret;
mod run;
mod segment;
mod values;

pub use environment::{DriftModel, Environment, InitialStates, PsModel};
pub use features::{FeatureMap, MdpDims};
pub use regret::{dynamic_regret, OracleCache, RegretMode};
pub use run::{run_agent, simulate_episode, Agent, EpisodeRecord, EpisodeReport, RestartCause, RunOptions, RunTrace, Trajectory};
pub use segment::{sample_index, LinearParams, RewardNoise, SegmentModel, LINEAR_TOL, STOCHASTIC_TOL};
pub use values::{argmax, optimal_values, policy_values, EpisodePolicy, Policy, StochasticPolicy, ValueTable};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MdpError {
    #[error("dimensions must be strictly positive")]
    ZeroDimension,
    #[error("{what}: expected {expected} entries, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("feature of ({state}, {action}) has norm {norm} > 1")]
    FeatureNorm { state: usize, action: usize, norm: f64 },
    #[error("{what} {index} out of range (< {bound})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("reward mean {value} at (h={h}, s={s}, a={a}) outside [0, 1]")]
    RewardOutOfRange { h: usize, s: usize, a: usize, value: f64 },
    #[error("transition row (h={h}, s={s}, a={a}) is not a distribution (sum {sum})")]
    NotStochastic { h: usize, s: usize, a: usize, sum: f64 },
    #[error("materialized model disagrees with its linear parameters at (h={h}, s={s}, a={a})")]
    LinearMismatch { h: usize, s: usize, a: usize },
    #[error("{segments} segments for {change_points} change points")]
    SegmentCount { segments: usize, change_points: usize },
    #[error("{0}")]
    ChangePoints(String),
    #[error("{0}")]
    InvalidParameter(String),
}
