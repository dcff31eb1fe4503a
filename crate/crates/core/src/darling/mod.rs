//! The detection-restart wrapper: periodic probing episodes with a frozen
//! learner, reward and successor-feature change tests, and restarts.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::detectors::{ChangeDetector, ScalarHistory};
use crate::learners::Learner;
use crate::mdp::{Agent, EpisodePolicy, EpisodeReport, FeatureMap, RestartCause, StochasticPolicy};
use crate::probes::ProbeCollection;
use crate::SimRng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DarlingError {
    #[error("the probing schedule needs T >= 3, got {0}")]
    Horizon(usize),
    #[error("probe collection has {got} slices for horizon {expected}")]
    ProbeShape { expected: usize, got: usize },
    #[error("reference action {0} out of range")]
    ReferenceAction(usize),
}

/// `alpha_k = min(1, sqrt(k d H) / (2 sqrt(T) (ln T)^2))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaSchedule {
    pub dim: usize,
    pub horizon: usize,
    pub episodes: usize,
}

impl AlphaSchedule {
    pub fn new(dim: usize, horizon: usize, episodes: usize) -> Result<Self, DarlingError> {
        if episodes < 3 {
            return Err(DarlingError::Horizon(episodes));
        }
        Ok(Self { dim, horizon, episodes })
    }

    pub fn alpha(&self, k: usize) -> f64 {
        let t = self.episodes as f64;
        let raw = ((k * self.dim * self.horizon) as f64).sqrt() / (2.0 * t.sqrt() * t.ln().powi(2));
        raw.min(1.0)
    }

    /// `ceil(1 / alpha_k)`
    pub fn period(&self, k: usize) -> usize {
        (1.0 / self.alpha(k)).ceil() as usize
    }
}

/// `(t - tau) mod period == 0`.
pub fn is_probe_episode(t: usize, tau: usize, period: usize) -> bool {
    debug_assert!(t > tau);
    (t - tau).is_multiple_of(period)
}

/// Maps a feature coordinate in `[-1, 1]` to `[0, 1]`.
#[inline]
pub fn transition_stream_value(x: f64) -> f64 {
    (x + 1.0) / 2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DarlingConfig {
    /// Monitor one next-state indicator per successor state when features are
    /// one-hot, instead of `d x A` coordinates.
    pub dedup_tabular: bool,
    /// Reference actions `a'` for successor-feature streams; all actions when absent.
    pub reference_actions: Option<Vec<usize>>,
}

impl Default for DarlingConfig {
    fn default() -> Self {
        Self {
            dedup_tabular: true,
            reference_actions: None,
        }
    }
}

/// Identity of a monitored stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum StreamKey {
    Reward { h: usize, s: usize, a: usize },
    NextState { h: usize, s: usize, a: usize, next: usize },
    Feature { h: usize, s: usize, a: usize, j: usize, a_ref: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriggerEvent {
    pub t: usize,
    pub stream: StreamKey,
    pub split: Option<usize>,
    pub statistic: f64,
}

/// One probed pair: its reward stream and its transition streams.
#[derive(Clone, Debug, Default)]
struct ProbeSlot {
    state: usize,
    action: usize,
    reward: ScalarHistory,
    transitions: Vec<ScalarHistory>,
}

/// The wrapper around a learner `L` with change detector `D`.
pub struct Darling<L, D> {
    learner: L,
    detector: D,
    features: Arc<FeatureMap>,
    probes: Arc<ProbeCollection>,
    schedule: AlphaSchedule,
    reference_actions: Vec<usize>,
    dedup: bool,
    /// `slot_of[h][s * A + a]`
    slot_of: Vec<Vec<Option<usize>>>,
    slots: Vec<Vec<ProbeSlot>>,
    tau: usize,
    k: usize,
    restart_flag: bool,
    probing: bool,
    t: usize,
    triggers: usize,
    events: Vec<TriggerEvent>,
}

impl<L: Learner, D: ChangeDetector> Darling<L, D> {
    pub fn new(
        learner: L,
        detector: D,
        features: Arc<FeatureMap>,
        probes: Arc<ProbeCollection>,
        horizon: usize,
        episodes: usize,
        cfg: DarlingConfig,
    ) -> Result<Self, DarlingError> {
        if probes.slices().len() != horizon {
            return Err(DarlingError::ProbeShape {
                expected: horizon,
                got: probes.slices().len(),
            });
        }
        let actions = features.actions();
        let reference_actions = cfg.reference_actions.unwrap_or_else(|| (0..actions).collect());
        if let Some(&a) = reference_actions.iter().find(|&&a| a >= actions) {
            return Err(DarlingError::ReferenceAction(a));
        }
        let schedule = AlphaSchedule::new(features.dim(), horizon, episodes)?;
        let dedup = cfg.dedup_tabular && features.is_one_hot();
        let streams = if dedup {
            features.states()
        } else {
            features.dim() * reference_actions.len()
        };
        let mut slot_of = Vec::with_capacity(horizon);
        let mut slots = Vec::with_capacity(horizon);
        for slice in probes.slices() {
            let mut index = vec![None; features.states() * actions];
            let mut here = Vec::with_capacity(slice.pairs().len());
            for &(s, a) in slice.pairs() {
                index[s * actions + a] = Some(here.len());
                here.push(ProbeSlot {
                    state: s,
                    action: a,
                    reward: ScalarHistory::new(),
                    transitions: vec![ScalarHistory::new(); streams],
                });
            }
            slot_of.push(index);
            slots.push(here);
        }
        Ok(Self {
            learner,
            detector,
            features,
            probes,
            schedule,
            reference_actions,
            dedup,
            slot_of,
            slots,
            tau: 0,
            k: 1,
            restart_flag: false,
            probing: false,
            t: 0,
            triggers: 0,
            events: Vec::new(),
        })
    }

    pub fn learner(&self) -> &L {
        &self.learner
    }

    pub fn schedule(&self) -> &AlphaSchedule {
        &self.schedule
    }

    /// Last restart episode.
    pub fn tau(&self) -> usize {
        self.tau
    }

    /// Segment counter, one more than the number of restarts.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn restarts(&self) -> usize {
        self.k - 1
    }

    pub fn is_probing(&self) -> bool {
        self.probing
    }

    /// Number of monitored streams.
    pub fn stream_count(&self) -> usize {
        self.slots.iter().flatten().map(|s| 1 + s.transitions.len()).sum()
    }

    /// Total samples held across all histories.
    pub fn total_samples(&self) -> usize {
        self.slots
            .iter()
            .flatten()
            .map(|s| s.reward.len() + s.transitions.iter().map(ScalarHistory::len).sum::<usize>())
            .sum()
    }

    /// Samples held by reward histories only.
    pub fn reward_samples(&self) -> usize {
        self.slots.iter().flatten().map(|s| s.reward.len()).sum()
    }

    /// Trigger events of the most recent episode.
    pub fn last_events(&self) -> &[TriggerEvent] {
        &self.events
    }

    /// Whether episode `t` is a probing episode under the current `tau` and `k`.
    pub fn probe_due(&self, t: usize) -> bool {
        is_probe_episode(t, self.tau, self.schedule.period(self.k))
    }

    fn check(&mut self, key: StreamKey, outcome: crate::detectors::DetectionOutcome) {
        if outcome.triggered {
            self.triggers += 1;
            self.restart_flag = true;
            self.events.push(TriggerEvent {
                t: self.t,
                stream: key,
                split: outcome.best_split,
                statistic: outcome.best_statistic,
            });
        }
    }

    fn record_probe(&mut self, h: usize, slot: usize, reward: f64, next: usize) {
        let (s, a) = (self.slots[h][slot].state, self.slots[h][slot].action);
        self.slots[h][slot].reward.push(reward);
        let out = self.detector.test(&self.slots[h][slot].reward);
        self.check(StreamKey::Reward { h, s, a }, out);

        if self.dedup {
            for target in 0..self.features.states() {
                let x = if target == next { 1.0 } else { 0.0 };
                let hist = &mut self.slots[h][slot].transitions[target];
                hist.push(transition_stream_value(x));
                let out = self.detector.test(hist);
                self.check(StreamKey::NextState { h, s, a, next: target }, out);
            }
        } else {
            let refs = self.reference_actions.len();
            for r in 0..refs {
                let a_ref = self.reference_actions[r];
                for j in 0..self.features.dim() {
                    let x = self.features.phi(next, a_ref)[j];
                    let hist = &mut self.slots[h][slot].transitions[j * refs + r];
                    hist.push(transition_stream_value(x));
                    let out = self.detector.test(hist);
                    self.check(StreamKey::Feature { h, s, a, j, a_ref }, out);
                }
            }
        }
    }

    /// Resets the learner, empties every history and starts a new segment at `t`.
    pub fn restart(&mut self, t: usize) {
        self.learner.reset();
        for slot in self.slots.iter_mut().flatten() {
            slot.reward.clear();
            slot.transitions.iter_mut().for_each(ScalarHistory::clear);
        }
        self.tau = t;
        self.k += 1;
        self.restart_flag = false;
    }
}

impl<L: Learner, D: ChangeDetector> Agent for Darling<L, D> {
    fn name(&self) -> String {
        format!("darling+{}", self.learner.name())
    }

    fn begin_episode(&mut self, t: usize) {
        self.t = t;
        self.triggers = 0;
        self.events.clear();
        self.probing = self.probe_due(t);
    }

    fn episode_policy(&self) -> EpisodePolicy {
        let greedy = self.learner.greedy_policy();
        if !self.probing {
            return EpisodePolicy::Deterministic(greedy);
        }
        let mut mixed = StochasticPolicy::from_deterministic(&greedy, self.features.actions());
        for slice in self.probes.slices() {
            for (s, acts) in slice.supports() {
                mixed.set_uniform(slice.h, *s, acts);
            }
        }
        EpisodePolicy::Stochastic(mixed)
    }

    fn act(&mut self, h: usize, s: usize, rng: &mut SimRng) -> usize {
        if self.probing {
            if let Some(acts) = self.probes.slice(h).actions_at(s) {
                return acts[rng.random_range(0..acts.len())];
            }
        }
        self.learner.select_action(h, s)
    }

    fn observe(&mut self, h: usize, s: usize, a: usize, reward: f64, next: usize) {
        if !self.probing {
            self.learner.observe(h, s, a, reward, next);
            return;
        }
        if let Some(slot) = self.slot_of[h][s * self.features.actions() + a] {
            self.record_probe(h, slot, reward, next);
        }
    }

    fn end_episode(&mut self, t: usize) -> EpisodeReport {
        if !self.probing {
            self.learner.end_episode();
        }
        let restart = if self.restart_flag {
            self.restart(t);
            Some(RestartCause::Detection)
        } else {
            None
        };
        EpisodeReport {
            probe: self.probing,
            restart,
            restart_count: self.restarts(),
            triggers: self.triggers,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_is_monotone_and_clamped() {
        let s = AlphaSchedule::new(20, 5, 50_000).unwrap();
        for k in 1..50 {
            assert!(s.alpha(k + 1) >= s.alpha(k));
        }
        let tiny = AlphaSchedule::new(1000, 100, 3).unwrap();
        assert_eq!(tiny.alpha(1), 1.0);
        assert_eq!(tiny.period(1), 1);
        assert!(AlphaSchedule::new(1, 1, 2).is_err());
    }

    #[test]
    fn probe_cadence() {
        assert!((1..20).all(|t| is_probe_episode(t, 0, 1)));
        let hits: Vec<usize> = (1..=35).filter(|&t| is_probe_episode(t, 0, 10)).collect();
        assert_eq!(hits, vec![10, 20, 30]);
        let next = (18..40).find(|&t| is_probe_episode(t, 17, 5));
        assert_eq!(next, Some(22));
    }

    #[test]
    fn stream_values() {
        assert_eq!(transition_stream_value(-1.0), 0.0);
        assert_eq!(transition_stream_value(1.0), 1.0);
        assert_eq!(transition_stream_value(0.0), 0.5);
    }
}
