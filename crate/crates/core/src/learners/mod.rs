//! Stationary base learners behind a common interface.

mod lsvi;
mod toq;

pub use lsvi::{LsviConfig, LsviUcb};
pub use toq::{TabularOptimisticQ, ToqConfig};

use crate::mdp::{Agent, EpisodeReport, EpisodePolicy, Policy};
use crate::SimRng;

/// A stationary episodic learner. Steps are 0-based.
pub trait Learner: Send {
    fn name(&self) -> &'static str;
    /// Greedy action at `(h, s)`, lowest index on ties.
    fn select_action(&self, h: usize, s: usize) -> usize;
    fn observe(&mut self, h: usize, s: usize, a: usize, reward: f64, next: usize);
    fn end_episode(&mut self);
    /// The policy `select_action` currently implements, as a value.
    fn greedy_policy(&self) -> Policy;
    /// Back to the freshly constructed state.
    fn reset(&mut self);
}

impl<L: Learner + ?Sized> Learner for Box<L> {
    fn name(&self) -> &'static str {
        (**self).name()
    }
    fn select_action(&self, h: usize, s: usize) -> usize {
        (**self).select_action(h, s)
    }
    fn observe(&mut self, h: usize, s: usize, a: usize, reward: f64, next: usize) {
        (**self).observe(h, s, a, reward, next)
    }
    fn end_episode(&mut self) {
        (**self).end_episode()
    }
    fn greedy_policy(&self) -> Policy {
        (**self).greedy_policy()
    }
    fn reset(&mut self) {
        (**self).reset()
    }
}

/// A learner run on its own, with no restarts.
#[derive(Clone, Debug)]
pub struct Bare<L> {
    pub learner: L,
}

impl<L: Learner> Bare<L> {
    pub fn new(learner: L) -> Self {
        Self { learner }
    }
}

impl<L: Learner> Agent for Bare<L> {
    fn name(&self) -> String {
        self.learner.name().to_string()
    }

    fn begin_episode(&mut self, _t: usize) {}

    fn episode_policy(&self) -> EpisodePolicy {
        EpisodePolicy::Deterministic(self.learner.greedy_policy())
    }

    fn act(&mut self, h: usize, s: usize, _rng: &mut SimRng) -> usize {
        self.learner.select_action(h, s)
    }

    fn observe(&mut self, h: usize, s: usize, a: usize, reward: f64, next: usize) {
        self.learner.observe(h, s, a, reward, next);
    }

    fn end_episode(&mut self, _t: usize) -> EpisodeReport {
        self.learner.end_episode();
        EpisodeReport::default()
    }
}
