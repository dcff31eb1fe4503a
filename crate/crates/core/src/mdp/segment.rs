use rand::Rng;

use super::{FeatureMap, MdpError};

/// Row sums must be within this of one.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Materialized linear models must agree with `phi^T theta`, `phi^T mu` within this.
pub const LINEAR_TOL: f64 = 1e-9;

/// How reward samples are drawn around the mean `r_h(s, a)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardNoise {
    /// `R ~ Bernoulli(r)`.
    #[default]
    Bernoulli,
    /// `R = r`.
    Deterministic,
}

/// Linear parameters of one segment: `theta_h` in `R^d` and `d` signed measures `mu_h`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearParams {
    dim: usize,
    /// `[h][j]`
    theta: Vec<f64>,
    /// `[h][j][s']`
    mu: Vec<f64>,
}

impl LinearParams {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn theta(&self, h: usize) -> &[f64] {
        &self.theta[h * self.dim..(h + 1) * self.dim]
    }

    /// `mu_h` as a `d x S` row-major block.
    pub fn mu(&self, h: usize, states: usize) -> &[f64] {
        let block = self.dim * states;
        &self.mu[h * block..(h + 1) * block]
    }
}

/// Reward means and transition kernels of one stationary segment.
///
/// Steps are 0-based in storage: `h = 0` is the first step of an episode.
/// Construction validates row-stochasticity and reward bounds, so every value
/// of this type satisfies them.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentModel {
    states: usize,
    actions: usize,
    horizon: usize,
    rewards: Vec<f64>,
    transitions: Vec<f64>,
    linear: Option<LinearParams>,
}

impl SegmentModel {
    /// `rewards` is `[h][s][a]`, `transitions` is `[h][s][a][s']`.
    pub fn tabular(
        states: usize,
        actions: usize,
        horizon: usize,
        rewards: Vec<f64>,
        transitions: Vec<f64>,
    ) -> Result<Self, MdpError> {
        let model = Self {
            states,
            actions,
            horizon,
            rewards,
            transitions,
            linear: None,
        };
        model.validate()?;
        Ok(model)
    }

    /// Materializes `r_h(s,a) = phi(s,a)^T theta_h` and `P_h(s'|s,a) = phi(s,a)^T mu_h(s')`.
    ///
    /// `theta` is `[h][j]`, `mu` is `[h][j][s']`.
    pub fn from_linear(
        features: &FeatureMap,
        horizon: usize,
        theta: Vec<f64>,
        mu: Vec<f64>,
    ) -> Result<Self, MdpError> {
        let (states, actions, dim) = (features.states(), features.actions(), features.dim());
        if theta.len() != horizon * dim {
            return Err(MdpError::ShapeMismatch {
                what: "theta",
                expected: horizon * dim,
                got: theta.len(),
            });
        }
        if mu.len() != horizon * dim * states {
            return Err(MdpError::ShapeMismatch {
                what: "mu",
                expected: horizon * dim * states,
                got: mu.len(),
            });
        }
        let linear = LinearParams { dim, theta, mu };
        let mut rewards = vec![0.0; horizon * states * actions];
        let mut transitions = vec![0.0; horizon * states * actions * states];
        for h in 0..horizon {
            let th = linear.theta(h);
            let mu_h = linear.mu(h, states);
            for s in 0..states {
                for a in 0..actions {
                    let phi = features.phi(s, a);
                    let idx = (h * states + s) * actions + a;
                    rewards[idx] = dot(phi, th);
                    let row = &mut transitions[idx * states..(idx + 1) * states];
                    for (j, &p) in phi.iter().enumerate() {
                        if p != 0.0 {
                            for (dst, &m) in row.iter_mut().zip(&mu_h[j * states..(j + 1) * states]) {
                                *dst += p * m;
                            }
                        }
                    }
                }
            }
        }
        let model = Self {
            states,
            actions,
            horizon,
            rewards,
            transitions,
            linear: Some(linear),
        };
        model.validate()?;
        model.validate_linear(features)?;
        Ok(model)
    }

    /// Checks kernel rows and reward means.
    pub fn validate(&self) -> Result<(), MdpError> {
        let (s_n, a_n, h_n) = (self.states, self.actions, self.horizon);
        if s_n == 0 || a_n == 0 || h_n == 0 {
            return Err(MdpError::ZeroDimension);
        }
        if self.rewards.len() != h_n * s_n * a_n {
            return Err(MdpError::ShapeMismatch {
                what: "rewards",
                expected: h_n * s_n * a_n,
                got: self.rewards.len(),
            });
        }
        if self.transitions.len() != h_n * s_n * a_n * s_n {
            return Err(MdpError::ShapeMismatch {
                what: "transitions",
                expected: h_n * s_n * a_n * s_n,
                got: self.transitions.len(),
            });
        }
        for (idx, &r) in self.rewards.iter().enumerate() {
            if !(0.0..=1.0).contains(&r) {
                let (h, s, a) = self.unflatten(idx);
                return Err(MdpError::RewardOutOfRange { h, s, a, value: r });
            }
        }
        for (idx, row) in self.transitions.chunks_exact(s_n).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > STOCHASTIC_TOL {
                let (h, s, a) = self.unflatten(idx);
                return Err(MdpError::NotStochastic { h, s, a, sum });
            }
        }
        Ok(())
    }

    /// Checks that stored `r`, `P` match the linear parameters through `features`.
    pub fn validate_linear(&self, features: &FeatureMap) -> Result<(), MdpError> {
        let Some(lin) = &self.linear else {
            return Ok(());
        };
        for h in 0..self.horizon {
            for s in 0..self.states {
                for a in 0..self.actions {
                    let phi = features.phi(s, a);
                    let r = dot(phi, lin.theta(h));
                    if (r - self.reward(h, s, a)).abs() > LINEAR_TOL {
                        return Err(MdpError::LinearMismatch { h, s, a });
                    }
                    let mu_h = lin.mu(h, self.states);
                    for (s2, &p) in self.transition_row(h, s, a).iter().enumerate() {
                        let lin_p: f64 = phi
                            .iter()
                            .enumerate()
                            .map(|(j, &x)| x * mu_h[j * self.states + s2])
                            .sum();
                        if (lin_p - p).abs() > LINEAR_TOL {
                            return Err(MdpError::LinearMismatch { h, s, a });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn unflatten(&self, idx: usize) -> (usize, usize, usize) {
        let a = idx % self.actions;
        let s = (idx / self.actions) % self.states;
        let h = idx / (self.actions * self.states);
        (h, s, a)
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn linear(&self) -> Option<&LinearParams> {
        self.linear.as_ref()
    }

    #[inline]
    pub fn reward(&self, h: usize, s: usize, a: usize) -> f64 {
        self.rewards[(h * self.states + s) * self.actions + a]
    }

    #[inline]
    pub fn transition_row(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let idx = (h * self.states + s) * self.actions + a;
        &self.transitions[idx * self.states..(idx + 1) * self.states]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    /// `(1 - lambda) * self + lambda * other`, including linear parameters when both have them.
    pub fn convex_combination(&self, other: &Self, lambda: f64) -> Result<Self, MdpError> {
        if (self.states, self.actions, self.horizon) != (other.states, other.actions, other.horizon) {
            return Err(MdpError::ShapeMismatch {
                what: "segment dimensions",
                expected: self.transitions.len(),
                got: other.transitions.len(),
            });
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(MdpError::InvalidParameter(format!(
                "interpolation weight {lambda} outside [0, 1]"
            )));
        }
        let mix = |x: &[f64], y: &[f64]| -> Vec<f64> {
            x.iter().zip(y).map(|(a, b)| (1.0 - lambda) * a + lambda * b).collect()
        };
        let linear = match (&self.linear, &other.linear) {
            (Some(p), Some(q)) if p.dim == q.dim => Some(LinearParams {
                dim: p.dim,
                theta: mix(&p.theta, &q.theta),
                mu: mix(&p.mu, &q.mu),
            }),
            _ => None,
        };
        let model = Self {
            states: self.states,
            actions: self.actions,
            horizon: self.horizon,
            rewards: mix(&self.rewards, &other.rewards),
            transitions: mix(&self.transitions, &other.transitions),
            linear,
        };
        model.validate()?;
        Ok(model)
    }

    /// Draws `(reward, next_state)` for one step.
    #[inline]
    pub fn sample_step<R: Rng + ?Sized>(
        &self,
        h: usize,
        s: usize,
        a: usize,
        noise: RewardNoise,
        rng: &mut R,
    ) -> (f64, usize) {
        let mean = self.reward(h, s, a);
        let reward = match noise {
            RewardNoise::Deterministic => mean,
            RewardNoise::Bernoulli => {
                if rng.random::<f64>() < mean {
                    1.0
                } else {
                    0.0
                }
            }
        };
        (reward, sample_index(self.transition_row(h, s, a), rng))
    }
}

/// Inverse-CDF draw from a probability row.
#[inline]
pub fn sample_index<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in row.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_state() -> SegmentModel {
        // h=1, S=2, A=1: s0 -> s1 w.p. 0.3
        SegmentModel::tabular(2, 1, 1, vec![0.5, 0.0], vec![0.7, 0.3, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn rejects_non_stochastic_rows() {
        let err = SegmentModel::tabular(2, 1, 1, vec![0.0, 0.0], vec![0.7, 0.2, 0.0, 1.0]).unwrap_err();
        assert!(matches!(err, MdpError::NotStochastic { h: 0, s: 0, a: 0, .. }));
        let err = SegmentModel::tabular(2, 1, 1, vec![0.0, 0.0], vec![1.1, -0.1, 0.0, 1.0]).unwrap_err();
        assert!(matches!(err, MdpError::NotStochastic { .. }));
    }

    #[test]
    fn rejects_rewards_outside_unit_interval() {
        let err = SegmentModel::tabular(1, 1, 1, vec![1.5], vec![1.0]).unwrap_err();
        assert!(matches!(err, MdpError::RewardOutOfRange { .. }));
    }

    #[test]
    fn bernoulli_zero_mean_gives_zero_rewards() {
        let m = SegmentModel::tabular(1, 1, 1, vec![0.0], vec![1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(m.sample_step(0, 0, 0, RewardNoise::Bernoulli, &mut rng).0, 0.0);
        }
    }

    #[test]
    fn next_state_frequencies_match_kernel() {
        let m = two_state();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 100_000;
        let hits = (0..draws)
            .filter(|_| m.sample_step(0, 0, 0, RewardNoise::Deterministic, &mut rng).1 == 1)
            .count();
        let p = 0.3;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        let freq = hits as f64 / draws as f64;
        assert!((freq - p).abs() < 3.0 * se, "freq {freq}");
    }

    #[test]
    fn convex_combination_stays_stochastic_and_between_endpoints() {
        let a = two_state();
        let b = SegmentModel::tabular(2, 1, 1, vec![0.1, 1.0], vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        for k in 0..=10 {
            let lam = k as f64 / 10.0;
            let m = a.convex_combination(&b, lam).unwrap();
            for (i, &r) in m.rewards().iter().enumerate() {
                let (lo, hi) = (a.rewards()[i].min(b.rewards()[i]), a.rewards()[i].max(b.rewards()[i]));
                assert!(r >= lo - 1e-15 && r <= hi + 1e-15);
            }
        }
        assert_eq!(a.convex_combination(&b, 1.0).unwrap().rewards(), b.rewards());
    }

    #[test]
    fn linear_materialization_matches_parameters() {
        let fm = FeatureMap::from_latent_indices(2, 2, 2, &[0, 1, 1, 0]).unwrap();
        let theta = vec![0.25, 0.75];
        let mu = vec![0.9, 0.1, 0.2, 0.8];
        let m = SegmentModel::from_linear(&fm, 1, theta, mu).unwrap();
        assert_eq!(m.reward(0, 0, 1), 0.75);
        assert_eq!(m.transition_row(0, 1, 1), &[0.9, 0.1]);
        assert!(m.validate_linear(&fm).is_ok());
    }
}
