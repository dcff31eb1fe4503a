//! Restart-based comparison wrappers: fixed-period and oracle restarts.

use crate::learners::Learner;
use crate::mdp::{Agent, EpisodePolicy, EpisodeReport, RestartCause};
use crate::SimRng;

/// `W = ceil(c sqrt(T / (N_T + 1)))`, at least 1.
pub fn budget_window(episodes: usize, changes: usize, c: f64) -> usize {
    ((c * (episodes as f64 / (changes + 1) as f64).sqrt()).ceil() as usize).max(1)
}

/// Resets the learner at the end of every `W`-th episode.
#[derive(Clone, Debug)]
pub struct PeriodicRestart<L> {
    learner: L,
    window: usize,
    since: usize,
    restarts: usize,
}

impl<L: Learner> PeriodicRestart<L> {
    pub fn new(learner: L, window: usize) -> Self {
        assert!(window >= 1, "restart window must be positive");
        Self {
            learner,
            window,
            since: 0,
            restarts: 0,
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn learner(&self) -> &L {
        &self.learner
    }
}

impl<L: Learner> Agent for PeriodicRestart<L> {
    fn name(&self) -> String {
        format!("periodic+{}", self.learner.name())
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
        self.since += 1;
        let restart = if self.since == self.window {
            self.learner.reset();
            self.since = 0;
            self.restarts += 1;
            Some(RestartCause::Scheduled)
        } else {
            None
        };
        EpisodeReport {
            probe: false,
            restart,
            restart_count: self.restarts,
            triggers: 0,
        }
    }
}

/// Resets the learner at the start of each true change point.
#[derive(Clone, Debug)]
pub struct OracleRestart<L> {
    learner: L,
    change_points: Vec<usize>,
    next: usize,
    restarts: usize,
    pending: bool,
}

impl<L: Learner> OracleRestart<L> {
    pub fn new(learner: L, change_points: Vec<usize>) -> Self {
        Self {
            learner,
            change_points,
            next: 0,
            restarts: 0,
            pending: false,
        }
    }

    pub fn learner(&self) -> &L {
        &self.learner
    }
}

impl<L: Learner> Agent for OracleRestart<L> {
    fn name(&self) -> String {
        format!("oracle+{}", self.learner.name())
    }

    fn begin_episode(&mut self, t: usize) {
        while self.next < self.change_points.len() && self.change_points[self.next] < t {
            self.next += 1;
        }
        if self.change_points.get(self.next) == Some(&t) {
            self.learner.reset();
            self.next += 1;
            self.restarts += 1;
            self.pending = true;
        }
    }

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
        let restart = std::mem::take(&mut self.pending).then_some(RestartCause::Oracle);
        EpisodeReport {
            probe: false,
            restart,
            restart_count: self.restarts,
            triggers: 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_window_formula() {
        assert_eq!(budget_window(10_000, 0, 1.0), 100);
        assert_eq!(budget_window(10_000, 3, 1.0), 50);
        assert_eq!(budget_window(10, 100, 1.0), 1);
    }
}
