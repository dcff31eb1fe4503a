use super::{MdpError, SegmentModel};

/// `V_h(s)` for `h = 0..=H` (with `V_H = 0`) and `Q_h(s, a)` for `h < H`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    states: usize,
    actions: usize,
    horizon: usize,
    v: Vec<f64>,
    q: Vec<f64>,
}

impl ValueTable {
    fn zeros(states: usize, actions: usize, horizon: usize) -> Self {
        Self {
            states,
            actions,
            horizon,
            v: vec![0.0; (horizon + 1) * states],
            q: vec![0.0; horizon * states * actions],
        }
    }

    #[inline]
    pub fn v(&self, h: usize, s: usize) -> f64 {
        self.v[h * self.states + s]
    }

    #[inline]
    pub fn q(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q[(h * self.states + s) * self.actions + a]
    }

    pub fn q_row(&self, h: usize, s: usize) -> &[f64] {
        let i = (h * self.states + s) * self.actions;
        &self.q[i..i + self.actions]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn states(&self) -> usize {
        self.states
    }

    /// Greedy policy w.r.t. `Q`, lowest action index on ties.
    pub fn greedy_policy(&self) -> Policy {
        let mut actions = Vec::with_capacity(self.horizon * self.states);
        for h in 0..self.horizon {
            for s in 0..self.states {
                actions.push(argmax(self.q_row(h, s)));
            }
        }
        Policy {
            states: self.states,
            horizon: self.horizon,
            actions,
        }
    }
}

/// First index of the maximum.
#[inline]
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

#[inline]
fn expect_next(row: &[f64], v_next: &[f64]) -> f64 {
    row.iter().zip(v_next).map(|(p, v)| p * v).sum()
}

/// Backward induction: `Q_h = r_h + P_h V_{h+1}`, `V_h = max_a Q_h`.
pub fn optimal_values(seg: &SegmentModel) -> ValueTable {
    let (states, actions, horizon) = (seg.states(), seg.actions(), seg.horizon());
    let mut table = ValueTable::zeros(states, actions, horizon);
    for h in (0..horizon).rev() {
        let (head, tail) = table.v.split_at_mut((h + 1) * states);
        let v_next = &tail[..states];
        let v_h = &mut head[h * states..];
        for s in 0..states {
            let mut best = f64::NEG_INFINITY;
            for a in 0..actions {
                let q = seg.reward(h, s, a) + expect_next(seg.transition_row(h, s, a), v_next);
                table.q[(h * states + s) * actions + a] = q;
                best = best.max(q);
            }
            v_h[s] = best;
        }
    }
    table
}

/// A deterministic non-stationary policy `(h, s) -> a`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Policy {
    states: usize,
    horizon: usize,
    actions: Vec<usize>,
}

impl Policy {
    /// `actions` is `[h][s]`.
    pub fn new(states: usize, horizon: usize, actions: Vec<usize>) -> Result<Self, MdpError> {
        if actions.len() != states * horizon {
            return Err(MdpError::ShapeMismatch {
                what: "policy",
                expected: states * horizon,
                got: actions.len(),
            });
        }
        Ok(Self {
            states,
            horizon,
            actions,
        })
    }

    pub fn constant(states: usize, horizon: usize, action: usize) -> Self {
        Self {
            states,
            horizon,
            actions: vec![action; states * horizon],
        }
    }

    #[inline]
    pub fn action(&self, h: usize, s: usize) -> usize {
        self.actions[h * self.states + s]
    }

    pub fn set(&mut self, h: usize, s: usize, a: usize) {
        self.actions[h * self.states + s] = a;
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }
}

/// Exact evaluation of a deterministic policy.
pub fn policy_values(seg: &SegmentModel, policy: &Policy) -> Result<ValueTable, MdpError> {
    let (states, actions, horizon) = (seg.states(), seg.actions(), seg.horizon());
    if policy.states != states || policy.horizon != horizon {
        return Err(MdpError::ShapeMismatch {
            what: "policy",
            expected: states * horizon,
            got: policy.actions.len(),
        });
    }
    if let Some(&a) = policy.actions.iter().find(|&&a| a >= actions) {
        return Err(MdpError::IndexOutOfRange {
            what: "policy action",
            index: a,
            bound: actions,
        });
    }
    let mut table = ValueTable::zeros(states, actions, horizon);
    for h in (0..horizon).rev() {
        let (head, tail) = table.v.split_at_mut((h + 1) * states);
        let v_next = &tail[..states];
        for s in 0..states {
            for a in 0..actions {
                table.q[(h * states + s) * actions + a] =
                    seg.reward(h, s, a) + expect_next(seg.transition_row(h, s, a), v_next);
            }
            head[h * states + s] = table.q[(h * states + s) * actions + policy.action(h, s)];
        }
    }
    Ok(table)
}

/// A Markov randomized policy with action probabilities `[h][s][a]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticPolicy {
    states: usize,
    actions: usize,
    horizon: usize,
    probs: Vec<f64>,
}

impl StochasticPolicy {
    pub fn from_deterministic(policy: &Policy, actions: usize) -> Self {
        let mut probs = vec![0.0; policy.horizon * policy.states * actions];
        for (i, &a) in policy.actions.iter().enumerate() {
            probs[i * actions + a] = 1.0;
        }
        Self {
            states: policy.states,
            actions,
            horizon: policy.horizon,
            probs,
        }
    }

    /// Replaces the distribution at `(h, s)` with the uniform one over `support`.
    pub fn set_uniform(&mut self, h: usize, s: usize, support: &[usize]) {
        let i = (h * self.states + s) * self.actions;
        let row = &mut self.probs[i..i + self.actions];
        row.fill(0.0);
        let w = 1.0 / support.len() as f64;
        for &a in support {
            row[a] += w;
        }
    }

    pub fn probs(&self, h: usize, s: usize) -> &[f64] {
        let i = (h * self.states + s) * self.actions;
        &self.probs[i..i + self.actions]
    }

    /// `V_h(s)` of this policy on `seg`.
    pub fn values(&self, seg: &SegmentModel) -> Result<ValueTable, MdpError> {
        let (states, actions, horizon) = (seg.states(), seg.actions(), seg.horizon());
        if (self.states, self.actions, self.horizon) != (states, actions, horizon) {
            return Err(MdpError::ShapeMismatch {
                what: "stochastic policy",
                expected: states * actions * horizon,
                got: self.probs.len(),
            });
        }
        let mut table = ValueTable::zeros(states, actions, horizon);
        for h in (0..horizon).rev() {
            let (head, tail) = table.v.split_at_mut((h + 1) * states);
            let v_next = &tail[..states];
            for s in 0..states {
                let mut v = 0.0;
                for a in 0..actions {
                    let idx = (h * states + s) * actions + a;
                    let q = seg.reward(h, s, a) + expect_next(seg.transition_row(h, s, a), v_next);
                    table.q[idx] = q;
                    v += self.probs[idx] * q;
                }
                head[h * states + s] = v;
            }
        }
        Ok(table)
    }
}

/// The behaviour an agent commits to for one episode.
#[derive(Clone, Debug, PartialEq)]
pub enum EpisodePolicy {
    Deterministic(Policy),
    Stochastic(StochasticPolicy),
}

impl EpisodePolicy {
    /// Expected return from `s1` on `seg`.
    pub fn value(&self, seg: &SegmentModel, s1: usize) -> Result<f64, MdpError> {
        let table = match self {
            EpisodePolicy::Deterministic(p) => policy_values(seg, p)?,
            EpisodePolicy::Stochastic(p) => p.values(seg)?,
        };
        Ok(table.v(0, s1))
    }
}
