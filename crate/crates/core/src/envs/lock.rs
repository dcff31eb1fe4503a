use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::EnvError;
use crate::mdp::{DriftModel, FeatureMap, InitialStates, MdpDims, PsModel, RewardNoise, SegmentModel};

/// Parameters of the bidirectional combination lock.
///
/// State layout (0-based): `0` routing, `1..H` chain A positions `1..H-1`,
/// `H..2H-1` chain B positions `1..H-1`, `2H-1` sink. So `S = 2H`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LockTabularSpec {
    pub horizon: usize,
    pub states: usize,
    pub actions: usize,
    /// Probability that a correct action advances.
    pub success: f64,
    /// Probability that routing action `0` enters chain A (action `1` mirrors it).
    pub routing: f64,
    /// Endpoint rewards of chains A and B.
    pub endpoint_rewards: [f64; 2],
    /// Sink reward; `1/(8H)` when absent.
    pub sink_reward: Option<f64>,
}

impl Default for LockTabularSpec {
    fn default() -> Self {
        Self {
            horizon: 5,
            states: 10,
            actions: 2,
            success: 0.98,
            routing: 0.98,
            endpoint_rewards: [1.0, 0.25],
            sink_reward: None,
        }
    }
}

impl LockTabularSpec {
    pub fn sink_reward(&self) -> f64 {
        self.sink_reward.unwrap_or(1.0 / (8.0 * self.horizon as f64))
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.horizon < 2 {
            return Err(EnvError::Spec("lock horizon must be at least 2".into()));
        }
        if self.states != 2 * self.horizon {
            return Err(EnvError::Spec(format!(
                "lock needs S = 2H (routing, two chains of H-1 states, sink); got S={} H={}",
                self.states, self.horizon
            )));
        }
        if self.actions < 2 {
            return Err(EnvError::Spec("lock needs at least two actions".into()));
        }
        let probs = [self.success, self.routing, self.sink_reward()];
        let rewards = self.endpoint_rewards;
        if probs.iter().chain(&rewards).any(|p| !(0.0..=1.0).contains(p)) {
            return Err(EnvError::Spec("lock probabilities and rewards must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Index helpers for the lock layout; only `H` and `A` matter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LockLayout {
    pub horizon: usize,
    pub actions: usize,
}

impl LockLayout {
    pub fn of(model: &SegmentModel) -> Result<Self, EnvError> {
        if model.states() != 2 * model.horizon() || model.horizon() < 2 || model.actions() < 2 {
            return Err(EnvError::Spec("model does not have the lock layout".into()));
        }
        Ok(Self {
            horizon: model.horizon(),
            actions: model.actions(),
        })
    }

    pub fn states(&self) -> usize {
        2 * self.horizon
    }

    pub fn routing(&self) -> usize {
        0
    }

    pub fn sink(&self) -> usize {
        2 * self.horizon - 1
    }

    /// State at `pos` in `1..H` of chain `c` (0 = A, 1 = B).
    pub fn chain_state(&self, c: usize, pos: usize) -> usize {
        c * (self.horizon - 1) + pos
    }

    /// Inverse of `chain_state`.
    pub fn position(&self, s: usize) -> Option<(usize, usize)> {
        let len = self.horizon - 1;
        if s == 0 || s >= self.sink() {
            None
        } else {
            Some(((s - 1) / len, (s - 1) % len + 1))
        }
    }

    pub fn correct_action(&self, c: usize, pos: usize) -> usize {
        (pos + c) % self.actions
    }

    pub fn endpoint(&self, c: usize) -> (usize, usize) {
        let pos = self.horizon - 1;
        (self.chain_state(c, pos), self.correct_action(c, pos))
    }
}

/// The lock with routing `(p, 1-p)` for action 0 and `(1-p, p)` for action 1.
fn lock_with_routing(spec: &LockTabularSpec, p: f64) -> Result<SegmentModel, EnvError> {
    let lay = LockLayout {
        horizon: spec.horizon,
        actions: spec.actions,
    };
    let (ns, na, hz) = (lay.states(), lay.actions, lay.horizon);
    let sink_r = spec.sink_reward();
    let mut rewards = vec![0.0; hz * ns * na];
    let mut trans = vec![0.0; hz * ns * na * ns];
    for h in 0..hz {
        for s in 0..ns {
            for a in 0..na {
                let idx = (h * ns + s) * na + a;
                let row = &mut trans[idx * ns..(idx + 1) * ns];
                if s == lay.routing() {
                    match a {
                        0 | 1 => {
                            let to_a = if a == 0 { p } else { 1.0 - p };
                            row[lay.chain_state(0, 1)] += to_a;
                            row[lay.chain_state(1, 1)] += 1.0 - to_a;
                        }
                        _ => {
                            row[lay.sink()] = 1.0;
                            rewards[idx] = sink_r;
                        }
                    }
                } else if s == lay.sink() {
                    row[lay.sink()] = 1.0;
                    rewards[idx] = sink_r;
                } else {
                    let (c, pos) = lay.position(s).expect("chain state");
                    if a == lay.correct_action(c, pos) {
                        if pos + 1 < hz {
                            row[lay.chain_state(c, pos + 1)] = spec.success;
                            row[lay.sink()] += 1.0 - spec.success;
                        } else {
                            row[lay.sink()] = 1.0;
                            rewards[idx] = spec.endpoint_rewards[c];
                        }
                    } else {
                        row[lay.sink()] = 1.0;
                        rewards[idx] = sink_r;
                    }
                }
            }
        }
    }
    Ok(SegmentModel::tabular(ns, na, hz, rewards, trans)?)
}

pub fn build_bidirectional_lock(spec: &LockTabularSpec) -> Result<SegmentModel, EnvError> {
    spec.validate()?;
    lock_with_routing(spec, spec.routing)
}

/// Exchanges the two endpoint rewards; kernels are untouched.
pub fn ps_endpoint_swap(model: &SegmentModel) -> Result<SegmentModel, EnvError> {
    let lay = LockLayout::of(model)?;
    let (ns, na) = (lay.states(), lay.actions);
    let (ea, aa) = lay.endpoint(0);
    let (eb, ab) = lay.endpoint(1);
    let mut rewards = model.rewards().to_vec();
    for h in 0..lay.horizon {
        rewards.swap((h * ns + ea) * na + aa, (h * ns + eb) * na + ab);
    }
    Ok(SegmentModel::tabular(ns, na, lay.horizon, rewards, model.transitions().to_vec())?)
}

/// Routing mixed linearly from the original towards the mirrored one:
/// `lambda = (t-1)/(T-1)`, so `t = 1` is the model itself and `t = T` has
/// the routing rows of actions 0 and 1 exchanged.
pub fn drift_tabular(model: &SegmentModel, t: usize, episodes: usize) -> Result<SegmentModel, EnvError> {
    let lay = LockLayout::of(model)?;
    if episodes < 2 || t == 0 || t > episodes {
        return Err(EnvError::Spec(format!("drift needs 1 <= t <= T with T >= 2, got t={t} T={episodes}")));
    }
    let lambda = (t - 1) as f64 / (episodes - 1) as f64;
    Ok(model.convex_combination(&mirror_routing(model, lay)?, lambda)?)
}

fn mirror_routing(model: &SegmentModel, lay: LockLayout) -> Result<SegmentModel, EnvError> {
    let (ns, na) = (lay.states(), lay.actions);
    let mut trans = model.transitions().to_vec();
    for h in 0..lay.horizon {
        let r0 = (h * ns + lay.routing()) * na;
        let (x, y) = ((r0) * ns, (r0 + 1) * ns);
        for j in 0..ns {
            trans.swap(x + j, y + j);
        }
    }
    Ok(SegmentModel::tabular(ns, na, lay.horizon, model.rewards().to_vec(), trans)?)
}

fn lock_dims(spec: &LockTabularSpec, episodes: usize) -> Result<(MdpDims, Arc<FeatureMap>), EnvError> {
    let dims = MdpDims::tabular(spec.states, spec.actions, spec.horizon, episodes)?;
    Ok((dims, Arc::new(FeatureMap::one_hot(spec.states, spec.actions)?)))
}

/// Abrupt protocol: the endpoints swap at every change point.
pub fn lock_ps(spec: &LockTabularSpec, change_points: Vec<usize>, episodes: usize) -> Result<PsModel, EnvError> {
    let base = Arc::new(build_bidirectional_lock(spec)?);
    let swapped = Arc::new(ps_endpoint_swap(&base)?);
    let segments = (0..=change_points.len())
        .map(|k| Arc::clone(if k % 2 == 0 { &base } else { &swapped }))
        .collect();
    let (dims, fm) = lock_dims(spec, episodes)?;
    Ok(PsModel::new(
        dims,
        fm,
        change_points,
        segments,
        InitialStates::Fixed(0),
        RewardNoise::Deterministic,
    )?)
}

/// Gradual protocol: routing morphs linearly over `[1, T]`.
pub fn lock_drift(spec: &LockTabularSpec, episodes: usize) -> Result<DriftModel, EnvError> {
    let base = build_bidirectional_lock(spec)?;
    let end = drift_tabular(&base, episodes, episodes)?;
    let (dims, fm) = lock_dims(spec, episodes)?;
    Ok(DriftModel::new(
        dims,
        fm,
        vec![(1, Arc::new(base)), (episodes, Arc::new(end))],
        InitialStates::Fixed(0),
        RewardNoise::Deterministic,
    )?)
}
