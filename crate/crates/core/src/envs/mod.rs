//! Benchmark environments: the two combination locks under abrupt and
//! gradual protocols, a geometric change-point sampler, and the lower-bound
//! instance generators.

mod chain;
mod hard;
mod lock;
mod schedule;

pub use chain::{build_chain_lock, drift_linear, ps_chain_switch, ChainLock, LockLinearSpec};
pub use hard::{
    action_vector, build_linear_hard_instance, build_tabular_hard_instance, hard_epsilon, linear_amplitude,
    random_sign_vectors, tree_depth, HardInstanceLinear, HardInstanceTabular, LeafTriple, TildeRule,
};
pub use lock::{
    build_bidirectional_lock, drift_tabular, lock_drift, lock_ps, ps_endpoint_swap, LockLayout, LockTabularSpec,
};
pub use schedule::{
    check_changepoints, evenly_spaced_changepoints, geometric_parameter, sample_geometric_changepoints,
    ChangeSchedule,
};

use thiserror::Error;

use crate::mdp::{FeatureMap, MdpError, SegmentModel};
use crate::probes::{estimate_reachability, greedy_probe_selection, ProbeCollection};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid environment spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

/// Greedy probe sets over the pairs reachable under uniform play in any of
/// `segments`, scanned in `(s, a)` order.
pub fn reachable_probes(
    features: &FeatureMap,
    segments: &[&SegmentModel],
    initial: &[(usize, f64)],
) -> ProbeCollection {
    let report = estimate_reachability(segments, initial, None);
    let horizon = segments.first().map_or(0, |s| s.horizon());
    let slices = (0..horizon)
        .map(|h| {
            let candidates: Vec<(usize, usize)> = report
                .reachable_states(h)
                .into_iter()
                .flat_map(|s| (0..features.actions()).map(move |a| (s, a)))
                .collect();
            greedy_probe_selection(features, &candidates, h)
        })
        .collect();
    ProbeCollection::new(slices)
}
