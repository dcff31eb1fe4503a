use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::Learner;
use crate::mdp::{argmax, FeatureMap, Policy};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LsviConfig {
    /// Ridge parameter.
    pub lambda: f64,
    /// Bonus scale; `d sqrt(ln(2 d T / delta))` when absent.
    pub beta: Option<f64>,
    /// Confidence level; `1/T` when absent.
    pub delta: Option<f64>,
}

impl Default for LsviConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            beta: None,
            delta: None,
        }
    }
}

/// Per-step regression state: Cholesky factor of `Lambda_h`, `sum phi r`
/// and `sum phi e_{s'}^T`.
#[derive(Clone, Debug, PartialEq)]
struct StepData {
    chol: Vec<f64>,
    b_r: Vec<f64>,
    b_next: Vec<f64>,
}

/// Least-squares value iteration with an elliptical UCB bonus.
///
/// Data are folded into a Cholesky factor of `Lambda_h = lambda I + sum phi phi^T`
/// by rank-one updates. Planning runs at the end of each episode:
/// `w_h = Lambda_h^{-1} sum phi (r + V_{h+1}(s'))`,
/// `Q_h = min(H, phi^T w_h + beta ||phi||_{Lambda_h^{-1}})` clipped at 0.
#[derive(Clone, Debug)]
pub struct LsviUcb {
    features: Arc<FeatureMap>,
    horizon: usize,
    lambda: f64,
    beta: f64,
    steps: Vec<StepData>,
    q: Vec<f64>,
    dirty: bool,
}

impl PartialEq for LsviUcb {
    fn eq(&self, other: &Self) -> bool {
        self.horizon == other.horizon
            && self.lambda == other.lambda
            && self.beta == other.beta
            && self.steps == other.steps
            && self.q == other.q
            && self.dirty == other.dirty
            && *self.features == *other.features
    }
}

/// Lower-triangular `L` with `L L^T += x x^T`.
fn chol_rank_one(l: &mut [f64], d: usize, x: &mut [f64]) {
    for k in 0..d {
        let lkk = l[k * d + k];
        let r = lkk.hypot(x[k]);
        let c = r / lkk;
        let s = x[k] / lkk;
        l[k * d + k] = r;
        for i in k + 1..d {
            let lik = (l[i * d + k] + s * x[i]) / c;
            l[i * d + k] = lik;
            x[i] = c * x[i] - s * lik;
        }
    }
}

/// Solves `L y = b` in place.
fn forward(l: &[f64], d: usize, b: &mut [f64]) {
    for i in 0..d {
        let mut acc = b[i];
        for j in 0..i {
            acc -= l[i * d + j] * b[j];
        }
        b[i] = acc / l[i * d + i];
    }
}

/// Solves `L^T x = y` in place.
fn backward(l: &[f64], d: usize, y: &mut [f64]) {
    for i in (0..d).rev() {
        let mut acc = y[i];
        for j in i + 1..d {
            acc -= l[j * d + i] * y[j];
        }
        y[i] = acc / l[i * d + i];
    }
}

impl LsviUcb {
    pub fn new(features: Arc<FeatureMap>, horizon: usize, episodes: usize, cfg: LsviConfig) -> Self {
        let d = features.dim() as f64;
        let delta = cfg.delta.unwrap_or(1.0 / episodes as f64);
        let beta = cfg
            .beta
            .unwrap_or_else(|| d * (2.0 * d * episodes as f64 / delta).ln().max(0.0).sqrt());
        let mut learner = Self {
            features,
            horizon,
            lambda: cfg.lambda,
            beta,
            steps: Vec::new(),
            q: Vec::new(),
            dirty: false,
        };
        learner.reset();
        learner
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn q(&self, h: usize, s: usize, a: usize) -> f64 {
        let (ns, na) = (self.features.states(), self.features.actions());
        self.q[(h * ns + s) * na + a]
    }

    pub fn q_table(&self) -> &[f64] {
        &self.q
    }

    /// `||phi||_{Lambda_h^{-1}}`
    pub fn bonus_norm(&self, h: usize, phi: &[f64]) -> f64 {
        let d = self.features.dim();
        let mut y = phi.to_vec();
        forward(&self.steps[h].chol, d, &mut y);
        y.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Recomputes `Q` from all data seen so far.
    pub fn plan(&mut self) {
        let fm = Arc::clone(&self.features);
        let (d, ns, na, hz) = (fm.dim(), fm.states(), fm.actions(), self.horizon);
        let cap = hz as f64;
        let mut v_next = vec![0.0; ns];
        let mut class_q = vec![0.0; fm.class_count()];
        for h in (0..hz).rev() {
            let step = &self.steps[h];
            let mut w = step.b_r.clone();
            for (j, wj) in w.iter_mut().enumerate() {
                let row = &step.b_next[j * ns..(j + 1) * ns];
                *wj += row.iter().zip(&v_next).map(|(b, v)| b * v).sum::<f64>();
            }
            forward(&step.chol, d, &mut w);
            backward(&step.chol, d, &mut w);
            for (c, out) in class_q.iter_mut().enumerate() {
                let phi = fm.class_row(c);
                let mean: f64 = phi.iter().zip(&w).map(|(p, x)| p * x).sum();
                let mut y = phi.to_vec();
                forward(&step.chol, d, &mut y);
                let width = y.iter().map(|x| x * x).sum::<f64>().sqrt();
                *out = (mean + self.beta * width).clamp(0.0, cap);
            }
            for s in 0..ns {
                let mut best = f64::NEG_INFINITY;
                for a in 0..na {
                    let q = class_q[fm.class_of(s, a)];
                    self.q[(h * ns + s) * na + a] = q;
                    best = best.max(q);
                }
                v_next[s] = best;
            }
        }
        self.dirty = false;
    }
}

impl Learner for LsviUcb {
    fn name(&self) -> &'static str {
        "lsvi-ucb"
    }

    fn select_action(&self, h: usize, s: usize) -> usize {
        let na = self.features.actions();
        let i = (h * self.features.states() + s) * na;
        argmax(&self.q[i..i + na])
    }

    fn observe(&mut self, h: usize, s: usize, a: usize, reward: f64, next: usize) {
        let d = self.features.dim();
        let ns = self.features.states();
        let phi = self.features.phi(s, a);
        let step = &mut self.steps[h];
        let mut x = phi.to_vec();
        chol_rank_one(&mut step.chol, d, &mut x);
        for (j, &p) in phi.iter().enumerate() {
            if p != 0.0 {
                step.b_r[j] += p * reward;
                step.b_next[j * ns + next] += p;
            }
        }
        self.dirty = true;
    }

    fn end_episode(&mut self) {
        if self.dirty {
            self.plan();
        }
    }

    fn greedy_policy(&self) -> Policy {
        let ns = self.features.states();
        let mut actions = Vec::with_capacity(self.horizon * ns);
        for h in 0..self.horizon {
            for s in 0..ns {
                actions.push(self.select_action(h, s));
            }
        }
        Policy::new(ns, self.horizon, actions).expect("policy shape")
    }

    fn reset(&mut self) {
        let (d, ns, na) = (self.features.dim(), self.features.states(), self.features.actions());
        let mut chol = vec![0.0; d * d];
        for i in 0..d {
            chol[i * d + i] = self.lambda.sqrt();
        }
        self.steps = vec![
            StepData {
                chol,
                b_r: vec![0.0; d],
                b_next: vec![0.0; d * ns],
            };
            self.horizon
        ];
        self.q = vec![0.0; self.horizon * ns * na];
        self.plan();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_updates_match_direct_factorization() {
        let d = 3;
        let mut l = vec![0.0; 9];
        for i in 0..d {
            l[i * d + i] = 1.0;
        }
        let xs = [[0.3, -0.2, 0.5], [0.1, 0.9, 0.0], [-0.4, 0.4, 0.4]];
        let mut lam = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        for x in xs {
            let mut v = x.to_vec();
            chol_rank_one(&mut l, d, &mut v);
            for i in 0..d {
                for j in 0..d {
                    lam[i][j] += x[i] * x[j];
                }
            }
        }
        for i in 0..d {
            for j in 0..d {
                let llt: f64 = (0..d).map(|k| l[i * d + k] * l[j * d + k]).sum();
                assert!((llt - lam[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn no_data_gives_pure_bonus() {
        let fm = Arc::new(FeatureMap::one_hot(2, 2).unwrap());
        let l = LsviUcb::new(fm, 3, 100, LsviConfig { beta: Some(0.7), ..LsviConfig::default() });
        for h in 0..3 {
            assert!((l.q(h, 1, 0) - 0.7).abs() < 1e-15);
        }
    }

    #[test]
    fn bonus_shrinks_with_repeated_features() {
        let fm = Arc::new(FeatureMap::from_latent_indices(1, 2, 2, &[0, 1]).unwrap());
        let mut l = LsviUcb::new(Arc::clone(&fm), 1, 100, LsviConfig::default());
        let mut prev = l.bonus_norm(0, fm.phi(0, 0));
        for _ in 0..5 {
            l.observe(0, 0, 0, 1.0, 0);
            let b = l.bonus_norm(0, fm.phi(0, 0));
            assert!(b <= prev);
            prev = b;
        }
        assert!((prev - 1.0 / 6f64.sqrt()).abs() < 1e-12);
    }
}
