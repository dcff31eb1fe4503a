use serde::{Deserialize, Serialize};

use super::Learner;
use crate::mdp::{argmax, Policy};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToqConfig {
    /// Confidence scale `c_b`.
    pub c_b: f64,
    /// Confidence level; `1/T` when absent.
    pub delta: Option<f64>,
}

impl Default for ToqConfig {
    fn default() -> Self {
        Self { c_b: 1.0, delta: None }
    }
}

/// Optimistic Q-learning with Hoeffding bonuses.
///
/// `alpha_N = (H+1)/(H+N)`, `b_N = c_b sqrt(H^3 ln(SAT/delta)/N)`,
/// `Q <- (1-alpha) Q + alpha (r + V_{h+1}(s') + b)`, clipped to `[0, H-h]`
/// (0-based `h`), and `V_h(s) = min(H-h, max_a Q_h(s, a))`.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularOptimisticQ {
    states: usize,
    actions: usize,
    horizon: usize,
    log_term: f64,
    c_b: f64,
    q: Vec<f64>,
    v: Vec<f64>,
    visits: Vec<u32>,
}

impl TabularOptimisticQ {
    pub fn new(states: usize, actions: usize, horizon: usize, episodes: usize, cfg: ToqConfig) -> Self {
        let delta = cfg.delta.unwrap_or(1.0 / episodes as f64);
        let log_term = ((states * actions * episodes) as f64 / delta).ln().max(0.0);
        let mut learner = Self {
            states,
            actions,
            horizon,
            log_term,
            c_b: cfg.c_b,
            q: Vec::new(),
            v: Vec::new(),
            visits: Vec::new(),
        };
        learner.reset();
        learner
    }

    #[inline]
    fn idx(&self, h: usize, s: usize, a: usize) -> usize {
        (h * self.states + s) * self.actions + a
    }

    pub fn q(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q[self.idx(h, s, a)]
    }

    pub fn v(&self, h: usize, s: usize) -> f64 {
        self.v[h * self.states + s]
    }

    pub fn visits(&self, h: usize, s: usize, a: usize) -> u32 {
        self.visits[self.idx(h, s, a)]
    }

    /// Bonus after `n >= 1` visits.
    pub fn bonus(&self, n: u32) -> f64 {
        let h = self.horizon as f64;
        self.c_b * (h * h * h * self.log_term / n as f64).sqrt()
    }

    pub fn q_table(&self) -> &[f64] {
        &self.q
    }
}

impl Learner for TabularOptimisticQ {
    fn name(&self) -> &'static str {
        "toq"
    }

    fn select_action(&self, h: usize, s: usize) -> usize {
        let i = self.idx(h, s, 0);
        argmax(&self.q[i..i + self.actions])
    }

    fn observe(&mut self, h: usize, s: usize, a: usize, reward: f64, next: usize) {
        let i = self.idx(h, s, a);
        self.visits[i] += 1;
        let n = self.visits[i];
        let hf = self.horizon as f64;
        let alpha = (hf + 1.0) / (hf + n as f64);
        let v_next = self.v[(h + 1) * self.states + next];
        let cap = (self.horizon - h) as f64;
        let target = reward + v_next + self.bonus(n);
        self.q[i] = ((1.0 - alpha) * self.q[i] + alpha * target).clamp(0.0, cap);
        let row = &self.q[i - a..i - a + self.actions];
        let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.v[h * self.states + s] = best.min(cap);
    }

    fn end_episode(&mut self) {}

    fn greedy_policy(&self) -> Policy {
        let mut actions = Vec::with_capacity(self.horizon * self.states);
        for h in 0..self.horizon {
            for s in 0..self.states {
                actions.push(self.select_action(h, s));
            }
        }
        Policy::new(self.states, self.horizon, actions).expect("policy shape")
    }

    fn reset(&mut self) {
        let (s, a, hz) = (self.states, self.actions, self.horizon);
        self.q = (0..hz)
            .flat_map(|h| std::iter::repeat_n((hz - h) as f64, s * a))
            .collect();
        self.v = (0..=hz).flat_map(|h| std::iter::repeat_n((hz - h) as f64, s)).collect();
        self.visits = vec![0; hz * s * a];
    }
}
