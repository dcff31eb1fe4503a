//! Turning config entries into environments and agents.

use std::sync::Arc;

use darling_core::baselines::{budget_window, OracleRestart, PeriodicRestart};
use darling_core::darling::Darling;
use darling_core::detectors::{Detector, DetectorConfig};
use darling_core::envs::{
    build_chain_lock, build_linear_hard_instance, build_tabular_hard_instance, drift_linear, lock_drift, lock_ps,
    ps_chain_switch, random_sign_vectors, reachable_probes, ChangeSchedule,
};
use darling_core::learners::{Bare, Learner, LsviUcb, TabularOptimisticQ};
use darling_core::mdp::{Agent, Environment, SegmentModel};
use darling_core::probes::ProbeCollection;
use darling_core::SimRng;
use rand::Rng;

use crate::config::{AlgorithmSpec, EnvEntry, LearnerSpec, Protocol, Wrapper};
use crate::HarnessError;

/// An environment instance plus what the agents are allowed to know about it.
pub struct BuiltEnv {
    pub env: Box<dyn Environment>,
    /// True change points; empty under drift.
    pub change_points: Vec<usize>,
    /// Models whose reachable pairs seed the probe candidates.
    pub probe_models: Vec<Arc<SegmentModel>>,
}

impl BuiltEnv {
    /// Probe collection from pairs reachable under uniform play in any listed model.
    pub fn probes(&self) -> ProbeCollection {
        let segs: Vec<&SegmentModel> = self.probe_models.iter().map(|m| m.as_ref()).collect();
        reachable_probes(self.env.features(), &segs, &self.env.initial_states().distribution())
    }
}

fn schedule(protocol: &Protocol) -> Option<ChangeSchedule> {
    match protocol {
        Protocol::PsGeometric { xi } => Some(ChangeSchedule::Geometric { xi: *xi }),
        Protocol::PsExplicit { change_points } => Some(ChangeSchedule::Explicit {
            change_points: change_points.clone(),
        }),
        Protocol::PsEven { changes } => Some(ChangeSchedule::Even { changes: *changes }),
        Protocol::Drift { .. } => None,
    }
}

/// Builds one environment. All randomness (change points, hard-instance draws)
/// comes from `rng`.
pub fn build_env(
    entry: &EnvEntry,
    protocol: &Protocol,
    episodes: usize,
    rng: &mut SimRng,
) -> Result<BuiltEnv, HarnessError> {
    let cps = match schedule(protocol) {
        Some(s) => s.change_points(episodes, rng)?,
        None => Vec::new(),
    };
    let window = match protocol {
        Protocol::Drift { window } => Some(*window),
        _ => None,
    };
    let env: Box<dyn Environment> = match entry {
        EnvEntry::Lock { params, .. } => match window {
            None => Box::new(lock_ps(params, cps.clone(), episodes)?),
            Some(_) => Box::new(lock_drift(params, episodes)?),
        },
        EnvEntry::Chain { params, .. } => {
            let lock = build_chain_lock(params)?;
            match window {
                None => Box::new(ps_chain_switch(&lock, cps.clone(), episodes)?),
                Some(w) => Box::new(drift_linear(&lock, episodes, w)?),
            }
        }
        EnvEntry::HardTabular { states, actions, horizon, index, tilde, .. } => {
            let n = ps_even_changes(entry, protocol)?;
            let index = match index {
                Some(i) => i.clone(),
                None => (0..=n).map(|_| rng.random()).collect(),
            };
            let inst = build_tabular_hard_instance(*states, *actions, *horizon, n, episodes, &index, tilde)?;
            Box::new(inst.model)
        }
        EnvEntry::HardLinear { d, horizon, .. } => {
            let n = ps_even_changes(entry, protocol)?;
            let signs = random_sign_vectors(*d, *horizon, n, rng);
            Box::new(build_linear_hard_instance(*d, *horizon, episodes, n, signs)?.model)
        }
    };
    let change_points = env.change_points().to_vec();
    let probe_models = probe_models(env.as_ref(), episodes, window.unwrap_or(1));
    Ok(BuiltEnv { env, change_points, probe_models })
}

fn ps_even_changes(entry: &EnvEntry, protocol: &Protocol) -> Result<usize, HarnessError> {
    match protocol {
        Protocol::PsEven { changes } => Ok(*changes),
        _ => Err(HarnessError::Config(format!("{} only supports the ps-even protocol", entry.label()))),
    }
}

/// One model per segment, or a model every `window` episodes (plus the last) under drift.
fn probe_models(env: &dyn Environment, episodes: usize, window: usize) -> Vec<Arc<SegmentModel>> {
    let mut at: Vec<usize> = if env.change_points().is_empty() && env.distinct_models() > 1 {
        (1..=episodes).step_by(window).chain([episodes]).collect()
    } else {
        std::iter::once(1).chain(env.change_points().iter().copied()).collect()
    };
    at.dedup();
    let mut out: Vec<Arc<SegmentModel>> = Vec::new();
    for t in at {
        let seg = env.segment(t);
        if !out.iter().any(|m| Arc::ptr_eq(m, &seg)) {
            out.push(seg);
        }
    }
    out
}

fn learner(spec: &LearnerSpec, env: &dyn Environment, episodes: usize) -> Box<dyn Learner> {
    let dims = env.dims();
    match spec {
        LearnerSpec::Toq { params } => Box::new(TabularOptimisticQ::new(
            dims.states,
            dims.actions,
            dims.horizon,
            episodes,
            *params,
        )),
        LearnerSpec::Lsvi { params } => Box::new(LsviUcb::new(
            Arc::new(env.features().clone()),
            dims.horizon,
            episodes,
            *params,
        )),
    }
}

/// Builds the agent for one cell. `probes` is only used by DARLING.
pub fn build_agent(
    algo: &AlgorithmSpec,
    built: &BuiltEnv,
    episodes: usize,
    detector: DetectorConfig,
    probes: impl FnOnce() -> ProbeCollection,
) -> Result<Box<dyn Agent>, HarnessError> {
    let env = built.env.as_ref();
    let base = learner(&algo.learner, env, episodes);
    Ok(match algo.wrapper {
        Wrapper::Bare => Box::new(Bare::new(base)),
        Wrapper::Darling => Box::new(Darling::new(
            base,
            Detector::new(detector)?,
            Arc::new(env.features().clone()),
            Arc::new(probes()),
            env.dims().horizon,
            episodes,
            algo.darling.clone(),
        )?),
        Wrapper::Periodic => {
            let w = algo
                .window
                .unwrap_or_else(|| budget_window(episodes, built.change_points.len(), algo.window_c));
            Box::new(PeriodicRestart::new(base, w))
        }
        Wrapper::Oracle => Box::new(OracleRestart::new(base, built.change_points.clone())),
    })
}
