//! Detection-restart wrapper for piecewise-stationary episodic RL, with the
//! detectors, probe machinery, base learners and benchmark environments it
//! needs.

pub mod baselines;
pub mod darling;
pub mod detectors;
pub mod envs;
pub mod learners;
pub mod mdp;
pub mod probes;

/// The RNG used for every simulation stream.
pub type SimRng = rand_chacha::ChaCha8Rng;
